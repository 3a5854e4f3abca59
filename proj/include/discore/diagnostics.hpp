// Exact divergence diagnostics: the per-interval error decomposition of the
// learned scores, the truncation and discretization terms of the end-to-end
// KL budget, the two-point hardness pair, and the sample-complexity sweep
// harness.  Everything here is computed by full enumeration (no Monte
// Carlo), so the acceptance checks compare against exact numbers.
#pragma once

#include <cstdint>
#include <vector>

#include "discore/sampler.hpp"
#include "discore/score_net.hpp"
#include "discore/state_space.hpp"
#include "discore/trainer.hpp"

namespace discore {

// KL(p || q) with 0 log 0 := 0. A state with p > 0 but q = 0 makes the
// divergence +infinity, which is returned explicitly rather than thrown.
double kl_divergence(const DistTable& p, const DistTable& q);

// Expected squared score errors of interval k's network, all under the exact
// forward marginal at the net's frozen query time t' = (k+1)h + delta:
//   a: true score vs clipped outputs   (what the sampler actually uses)
//   b: true score vs raw outputs       (the unbounded estimator)
//   c: raw outputs vs clipped outputs  (the cost of clipping alone)
// They satisfy a <= 2b + 2c, c <= b, a <= 4b whenever the true score lies
// within the clip range.
struct ErrorTerms {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
};

ErrorTerms error_terms(const DistTable& p0, const ScoreNet& net, int k, double h,
                       double delta);

// KL of the forward marginal at the horizon against the uniform stationary
// law, next to its closed-form ceiling d * e^{-T} * log S.
struct TruncationReport {
  double kl = 0.0;
  double bound = 0.0;
};

TruncationReport truncation_error(const DistTable& p0, double T);

// Continuous-time integral vs discrete-time rectangle sum of the expected
// Bregman divergence between the interval-frozen scores: per interval k the
// function f_k(x) = D_I(s_{t_k}(x) || clipped net_k(x)) is fixed at the left
// endpoint t_k = kh + delta, and only the averaging law q_t moves,
//   ct = (1/S) sum_k integral over I_k of E_{q_t}[f_k] dt      (Simpson)
//   dt = (1/S) sum_k h * E_{q_{t_k}}[f_k]                       (rectangle)
// The O(h) ceiling for |ct - dt| is (S-1) * d * C * lambda * T * h / S with
// lambda = d(S-1)/S the uniform rate bound.
struct DiscretizationReport {
  double ct = 0.0;
  double dt = 0.0;
  double gap = 0.0;
  double bound = 0.0;
};

DiscretizationReport discretization_gap(const DistTable& p0,
                                        const std::vector<ScoreNet>& nets, int K,
                                        double h, double delta, double tol = 1e-8);

// Two-point laws P = (1-eps, eps), Q = (1-25eps, 25eps): exact KL(P||Q),
// squared Hellinger distance, and the 7.5*eps floor that H^2 must clear.
// Valid for 0 < eps < 1/25.
struct HardnessPoint {
  double eps = 0.0;
  double kl = 0.0;
  double h2 = 0.0;
  double lower = 0.0;
  bool pass = false;
};

HardnessPoint hardness_pair(double eps);

// --- sample-complexity sweep ---------------------------------------------

struct SweepRow {
  int64_t n_k = 0;
  uint64_t seed = 0;
  double mean_score_err = 0.0;  // mean over k of error_terms(...).a
  double kl = 0.0;              // KL(p_data || exact sampler output law)
  double wall_ms = 0.0;
};

// Ordinary least squares y = intercept + slope * x with the slope's
// standard error (needs at least 3 points for a finite stderr).
struct FitResult {
  double slope = 0.0;
  double intercept = 0.0;
  double stderr_slope = 0.0;
};

FitResult least_squares(const std::vector<double>& x, const std::vector<double>& y);

// Spearman rank correlation (average ranks on ties).
double spearman_rho(const std::vector<double>& x, const std::vector<double>& y);

struct SweepResult {
  std::vector<SweepRow> rows;       // grid order: n_k outer, seeds inner
  FitResult fit;                    // log(mean_score_err) vs log(n_k), all rows
  std::vector<double> median_kl;    // one median per n_k grid entry
  double spearman = 0.0;            // rank correlation of median_kl vs n_k
};

// Full grid over cfg.sweep_n x cfg.sweep_seeds. Each cell derives its own
// dataset/train/sample seeds from its sweep seed, draws a fresh dataset of
// n_k states from p0, trains, and measures mean_score_err and kl; cells are
// independent and run on `jobs` worker threads, with every row written to
// its grid slot so the output order never depends on scheduling.
SweepResult run_sweep(const RunConfig& cfg, const DistTable& p0, int jobs);

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path);

}  // namespace discore
