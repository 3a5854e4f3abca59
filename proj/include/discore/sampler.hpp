// Reverse-process simulation by uniformization, plus an exact marginal
// oracle for small state spaces.
//
// Reverse interval k covers reverse time [kh, (k+1)h] and is driven by the
// clipped scores of forward network K-1-k (the net frozen at forward time
// (K-k)h + delta): a trajectory starts at the uniform stationary law and
// applies K intervals in order.  Within an interval the jump rate from z to
// its coordinate-i-replaced neighbor is score/S, dominated by the constant
// lambda_raw/S where lambda_raw is the max aggregate score over states --
// so each interval draws N ~ Poisson(lambda_raw*h/S) trial epochs, and each
// trial flips to a neighbor with probability score/lambda_raw (staying put
// with the residual).  Dividing rates and the dominating constant by S
// together leaves these jump probabilities untouched; the factor is the
// reverse-generator normalization and cancels exactly.
//
// The exact oracle evaluates the same interval operator in closed form: the
// matrix exponential of h * (reverse generator) via the uniformization
// series sum_m Poisson_mu(m) P^m with P the trial kernel above, truncated
// once the remaining Poisson tail mass drops below tail_cutoff.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "discore/rng.hpp"
#include "discore/score_net.hpp"
#include "discore/state_space.hpp"

namespace discore {

struct SamplerConfig {
  int K = 0;
  double h = 0.0;
  double delta = 0.0;          // carried for T bookkeeping; the loop never uses it
  double poisson_guard = 1e3;  // max admissible effective intensity * h per interval
  double tail_cutoff = 1e-12;  // series truncation tail for the exact oracle
};

// Per-interval observability record; lambda is the effective Poisson
// intensity lambda_raw/S actually driving the trial count.
struct JumpRecord {
  int k = 0;  // reverse interval index
  double lambda = 0.0;
  long trials = 0;
  long flips = 0;
};

// Score source for one forward interval: a dense clipped table when the
// state space fits the enumeration cap (lambda exact by maximization),
// otherwise direct network queries with the analytic dominating rate
// C*d*(S-1) (lambda_exact = false; the CLI flags this in its log output).
// The model owns its network copy, so it stays valid after the source nets
// go away; the nets are small enough that the copy is immaterial.
struct IntervalModel {
  ScoreNet net;
  bool dense = false;
  ScoreTable table;
  double lambda_raw = 0.0;
  bool lambda_exact = true;
};

IntervalModel build_interval_model(const ScoreNet& net);
std::vector<IntervalModel> build_reverse_models(const std::vector<ScoreNet>& nets);

// Max aggregate clipped score (exact within the cap, else the analytic
// bound) -- the dominating constant before the 1/S normalization.
double lambda_k(const ScoreNet& net);

// One uniformization interval in place; returns the number of accepted
// flips and writes the trial count to *trials_out when non-null. Throws
// NumericError if the effective intensity * h exceeds the guard or if a
// state's aggregate exceeds the dominating rate (negative residual).
long uniformization_interval(const IntervalModel& model, StateVector& z, double h,
                             double poisson_guard, Rng& rng, long* trials_out = nullptr);

// Full reverse trajectory: z0 from the uniform stationary law, K intervals,
// models indexed by FORWARD k (interval i of the loop uses models[K-1-i]).
// Appends one JumpRecord per interval to *trace when non-null.
StateVector sample_reverse(const std::vector<IntervalModel>& models,
                           const SamplerConfig& cfg, Rng& rng,
                           std::vector<JumpRecord>* trace = nullptr);

// Exact output law of the sampler above (dense models required): the
// stationary vector pushed through K interval operators evaluated by the
// truncated uniformization series, renormalized at the end.
DistTable exact_reverse_marginal(const std::vector<IntervalModel>& models,
                                 const SamplerConfig& cfg);

void write_jump_trace(const std::vector<JumpRecord>& trace, const std::string& path);

}  // namespace discore
