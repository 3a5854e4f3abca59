// Acceptance gate: twelve behavior-level criteria, each timed against a
// pinned runtime limit. Prints exactly one PASS/FAIL line per criterion and
// exits nonzero if any criterion fails (including runtime overruns). All
// tolerances are pinned here in code; the heavier statistical checks reuse
// the library's verify suites so this binary and the `verify` subcommand
// can never drift apart.
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "discore/config.hpp"
#include "discore/diagnostics.hpp"
#include "discore/errors.hpp"
#include "discore/forward.hpp"
#include "discore/rng.hpp"
#include "discore/sampler.hpp"
#include "discore/score.hpp"
#include "discore/score_net.hpp"
#include "discore/state_space.hpp"
#include "discore/trainer.hpp"
#include "discore/verify.hpp"

using namespace discore;
namespace fs = std::filesystem;

namespace {

// ---------------------------------------------------------------- plumbing

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string strf(const char* fmt, ...) __attribute__((format(printf, 1, 2)));
std::string strf(const char* fmt, ...) {
  char buf[512];
  va_list args;
  va_start(args, fmt);
  std::vsnprintf(buf, sizeof buf, fmt, args);
  va_end(args);
  return buf;
}

// Each verify suite used by more than one criterion runs exactly once.
std::map<std::string, SuiteResult>& suite_cache() {
  static std::map<std::string, SuiteResult> cache;
  return cache;
}

const SuiteResult& suite(const std::string& name) {
  auto it = suite_cache().find(name);
  if (it != suite_cache().end()) return it->second;
  const RunConfig cfg;
  SuiteResult result;
  if (name == "state_process") result = verify_state_process(cfg);
  else if (name == "score_oracle") result = verify_score_oracle(cfg);
  else if (name == "bregman_loss") result = verify_bregman_loss(cfg);
  else if (name == "score_net") result = verify_score_net(cfg);
  else if (name == "diagnostics") result = verify_diagnostics(cfg);
  else throw ConfigError("acceptance: unknown suite " + name);
  return suite_cache().emplace(name, std::move(result)).first->second;
}

const CheckResult* find_check(const SuiteResult& s, const std::string& name) {
  for (const CheckResult& c : s.checks) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

Outcome from_suite(const SuiteResult& s) {
  Outcome out;
  out.pass = s.pass();
  if (out.pass) {
    out.detail = strf("all %zu checks pass", s.checks.size());
  } else {
    for (const CheckResult& c : s.checks) {
      if (c.pass) continue;
      if (!out.detail.empty()) out.detail += "; ";
      out.detail += c.name + ": " + c.detail;
    }
  }
  return out;
}

Outcome from_check(const SuiteResult& s, const std::string& name) {
  const CheckResult* c = find_check(s, name);
  if (!c) return {false, "check '" + name + "' missing from suite " + s.name};
  return {c->pass, c->detail};
}

struct CmdResult {
  int code = -1;
  std::string output;
};

CmdResult run_cmd(const std::string& cmd) {
  CmdResult res;
  FILE* pipe = popen((cmd + " 2>&1").c_str(), "r");
  if (!pipe) return res;
  char buf[4096];
  while (std::fgets(buf, sizeof buf, pipe) != nullptr) res.output += buf;
  const int status = pclose(pipe);
  res.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return res;
}

std::string file_bytes(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw ConfigError("acceptance: missing file " + p.string());
  return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

fs::path config_dir() {
  if (const char* env = std::getenv("DISCORE_CONFIG_DIR")) return env;
  return "configs";
}

RunConfig load_run_config(const std::string& leaf) {
  RunConfig cfg;
  load_config_file((config_dir() / leaf).string(), cfg);
  cfg.validate();
  return cfg;
}

// ---------------------------------------------------------------- criteria

// 1. Forward process: exact kernel identities at the endpoints plus the
//    module suite (semigroup 1e-10, MC-vs-exact TV < 0.01 at 1e5 draws).
Outcome criterion_forward() {
  for (int S = 2; S <= 4; ++S) {
    const TokenKernel at_zero = token_kernel(S, 0.0);
    const TokenKernel at_fifty = token_kernel(S, 50.0);
    for (int from = 0; from < S; ++from) {
      for (int to = 0; to < S; ++to) {
        const double ident = from == to ? 1.0 : 0.0;
        if (std::fabs(at_zero.row(from)[to] - ident) > 1e-12) {
          return {false, strf("t=0 kernel is not the identity at S=%d (entry %d,%d)",
                              S, from, to)};
        }
        if (std::fabs(at_fifty.row(from)[to] - 1.0 / S) > 1e-10) {
          return {false, strf("t=50 kernel has not flattened at S=%d (entry %d,%d)",
                              S, from, to)};
        }
      }
    }
  }
  Outcome out = from_suite(suite("state_process"));
  if (out.pass) out.detail = "endpoint kernels exact; " + out.detail;
  return out;
}

// 2. Score oracle: ratio bounds with zero violations over 100 laws x 20
//    times, reciprocity at 1e-9, detailed balance at 1e-10.
Outcome criterion_score_oracle() { return from_suite(suite("score_oracle")); }

// 3. Divergence inequalities: sandwich plus both triangle-type bounds on
//    1e4 random triples each, zero violations.
Outcome criterion_bregman() { return from_suite(suite("bregman_loss")); }

// 4. Gradients: analytic backprop vs central differences, relative error
//    < 1e-5 on 20 random nets with depth in {2,3} and width in {8,32}.
Outcome criterion_gradients() { return from_check(suite("score_net"), "gradient-check"); }

// 5. Interpolation: the tanh-layer constructor reproduces 50 random point
//    sets (up to 32 points, up to 12 input dims) with max error < 1e-8.
Outcome criterion_interpolation() {
  Rng rng(1205);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const int dim = 2 + static_cast<int>(rng.bounded(11));
    const int m = 2 + static_cast<int>(rng.bounded(31));
    std::vector<std::vector<double>> points(m, std::vector<double>(dim));
    for (auto& p : points) {
      for (double& v : p) v = rng.uniform(-1.0, 1.0);
    }
    std::vector<std::vector<double>> values(2, std::vector<double>(m));
    for (auto& comp : values) {
      for (double& v : comp) v = rng.uniform(-1.0, 1.0);
    }
    const Interpolant interp = construct_interpolant(points, values, 1300 + trial);
    for (int j = 0; j < m; ++j) {
      for (int c = 0; c < 2; ++c) {
        worst = std::max(worst,
                         std::fabs(interp_eval(interp, points[j], c) - values[c][j]));
      }
    }
    if (worst >= 1e-8) {
      return {false, strf("instance %d (m=%d, dim=%d) max error %.3g >= 1e-8",
                          trial, m, dim, worst)};
    }
  }
  return {true, strf("50 instances exact, worst residual %.3g < 1e-8", worst)};
}

// 6. Sampler exactness: TV(1e5 trajectory endpoints, exact marginal) < 0.01
//    on the trained smoke configuration, and a single uniformization
//    interval matches a dense scaling-and-squaring expm to 1e-10.
Outcome criterion_sampler() {
  const ScoreNet probe = net_init(3, 2, 8, 2, 2.5, 0.7, 1601);
  const std::vector<IntervalModel> probe_models = build_reverse_models({probe});
  SamplerConfig probe_cfg;
  probe_cfg.K = 1;
  probe_cfg.h = 0.8;
  probe_cfg.tail_cutoff = 1e-15;
  const DistTable series = exact_reverse_marginal(probe_models, probe_cfg);
  const StateSpace psp(3, 2);
  const int64_t n = psp.table_size();
  const ScoreTable scores = net_score_table(probe, true);
  const std::vector<double> gen = reverse_generator(scores);
  std::vector<double> a(static_cast<size_t>(n) * n);
  for (int64_t x = 0; x < n; ++x) {
    for (int64_t y = 0; y < n; ++y) {
      a[static_cast<size_t>(y) * n + x] =
          probe_cfg.h * gen[static_cast<size_t>(x) * n + y];
    }
  }
  const std::vector<double> em = dense_expm(a, static_cast<int>(n));
  double expm_err = 0.0;
  for (int64_t y = 0; y < n; ++y) {
    double acc = 0.0;
    for (int64_t x = 0; x < n; ++x) {
      acc += em[static_cast<size_t>(y) * n + x] / static_cast<double>(n);
    }
    expm_err = std::max(expm_err, std::fabs(acc - series.p[y]));
  }
  if (expm_err > 1e-10) {
    return {false, strf("series vs dense expm disagree by %.3g > 1e-10", expm_err)};
  }

  RunConfig cfg = load_run_config("smoke.cfg");
  const StateSpace sp(cfg.S, cfg.d);
  const DistTable p0 = parse_p0(cfg.p0, sp);
  Rng data_rng(cfg.seed_dataset);
  const Dataset ds = draw_dataset(p0, cfg.n_k, data_rng);
  const double C = cfg.clip > 0.0 ? cfg.clip : resolve_bound(&p0, &ds).C;
  const TrainResult tr = train(ds, cfg, C);
  const std::vector<IntervalModel> models = build_reverse_models(tr.nets);
  SamplerConfig scfg{cfg.K, cfg.h, cfg.delta, cfg.poisson_guard, cfg.tail_cutoff};
  const DistTable exact = exact_reverse_marginal(models, scfg);

  const int draws = 100000;
  Rng rng(cfg.seed_sample);
  DistTable emp(sp, std::vector<double>(sp.table_size(), 0.0));
  for (int i = 0; i < draws; ++i) {
    emp.p[index_of(sp, sample_reverse(models, scfg, rng))] += 1.0 / draws;
  }
  const double tv = tv_distance(emp, exact);
  if (!(tv < 0.01)) {
    return {false, strf("TV(1e5 samples, exact marginal) = %.5f >= 0.01", tv)};
  }
  return {true, strf("expm agreement %.2g <= 1e-10; TV over 1e5 draws %.5f < 0.01",
                     expm_err, tv)};
}

// 7. Error decomposition: clipped/raw/clip-gap expected squared errors obey
//    a <= 2b + 2c <= 4b and c <= b on 100 random nets at S=3, d=2 with the
//    C = 1.5B clipping policy, zero violations.
Outcome criterion_error_terms() { return from_check(suite("diagnostics"), "error-triple"); }

// 8. Truncation: the horizon KL stays below d*e^-T*log S on 200 random
//    configurations, and its fitted decay rate in T equals -1.0 +/- 0.1.
Outcome criterion_truncation() {
  const Outcome bound = from_check(suite("diagnostics"), "truncation-bound");
  const Outcome rate = from_check(suite("diagnostics"), "truncation-rate");
  Outcome out;
  out.pass = bound.pass && rate.pass;
  out.detail = "bound: " + bound.detail + "; rate: " + rate.detail;
  return out;
}

// 9. Discretization: |ct - dt| <= (S-1)dC*lambda*T*h/S on 20 random
//    configurations, and the gap scales as h (log-log slope 1.0 +/- 0.25
//    for one fixed score function across a halving h grid).
Outcome criterion_discretization() {
  Rng rng(1901);
  double worst_margin = 1e300;
  for (int trial = 0; trial < 20; ++trial) {
    const int S = 2 + static_cast<int>(rng.bounded(2));
    const int d = 1 + static_cast<int>(rng.bounded(2));
    const StateSpace sp(S, d);
    std::vector<double> raw(sp.table_size());
    for (double& v : raw) v = rng.uniform(0.5, 1.0);
    DistTable p0(sp, std::move(raw));
    p0.renormalize();
    const double C = score_bound(p0).C;
    const int K = 2 + static_cast<int>(rng.bounded(3));
    const double h = 0.25;
    std::vector<ScoreNet> nets;
    for (int k = 0; k < K; ++k) {
      nets.push_back(net_init(S, d, 8, 2, C, h * (k + 1), 1910 + 10 * trial + k));
    }
    const DiscretizationReport rep = discretization_gap(p0, nets, K, h, 0.0);
    if (!(rep.gap <= rep.bound)) {
      return {false, strf("config %d: gap %.3g exceeds ceiling %.3g", trial,
                          rep.gap, rep.bound)};
    }
    worst_margin = std::min(worst_margin, rep.bound - rep.gap);
  }

  const StateSpace sp(2, 1);
  const DistTable p0(sp, {0.75, 0.25});
  const ScoreNet fixed = net_init(2, 1, 8, 2, 3.0, 0.5, 1902);
  const double T = 0.8;
  std::vector<double> log_h, log_gap;
  for (const double h : {0.2, 0.1, 0.05, 0.025}) {
    const int K = static_cast<int>(std::lround(T / h));
    const std::vector<ScoreNet> nets(K, fixed);
    const double gap = discretization_gap(p0, nets, K, h, 0.0, 1e-10).gap;
    if (!(gap > 0.0)) return {false, strf("gap vanished at h=%g; no slope to fit", h)};
    log_h.push_back(std::log(h));
    log_gap.push_back(std::log(gap));
  }
  const FitResult fit = least_squares(log_h, log_gap);
  if (!(fit.slope >= 0.75 && fit.slope <= 1.25)) {
    return {false, strf("gap-vs-h slope %.3f outside 1.0 +/- 0.25", fit.slope)};
  }
  return {true, strf("20/20 configs under the ceiling (min margin %.3g); "
                     "gap slope %.3f in 1.0 +/- 0.25",
                     worst_margin, fit.slope)};
}

// 10. Sample-complexity sweep: S=3 d=2 product law, 20 intervals of h=0.25
//     (plus the 0.05 interval shift), n_k grid {1e2,1e3,1e4,1e5} x 5 seeds;
//     log-log slope of the mean score error in [-0.7, -0.3] and median KL
//     strictly decreasing (Spearman <= -0.8).
Outcome criterion_sweep() {
  const RunConfig cfg = load_run_config("sweep_ref.cfg");
  const DistTable p0 = parse_p0(cfg.p0, StateSpace(cfg.S, cfg.d));
  const unsigned hw = std::thread::hardware_concurrency();
  const SweepResult res = run_sweep(cfg, p0, hw ? static_cast<int>(hw) : 2);
  std::string medians;
  for (size_t g = 0; g < res.median_kl.size(); ++g) {
    medians += strf("%s%.3g", g ? "," : "", res.median_kl[g]);
  }
  const bool slope_ok = res.fit.slope >= -0.7 && res.fit.slope <= -0.3;
  const bool spearman_ok = res.spearman <= -0.8;
  return {slope_ok && spearman_ok,
          strf("score-error slope %.3f (want [-0.7,-0.3]); Spearman(median KL, n) "
               "%.2f (want <= -0.8); median KL by n: %s",
               res.fit.slope, res.spearman, medians.c_str())};
}

// 11. Hardness table: squared Hellinger clears 7.5*eps on a 30-point log
//     grid inside (1e-4, 0.039], and KL/eps at eps=1e-4 sits within 0.5% of
//     its small-eps limit 24 - log 25.
Outcome criterion_hardness() {
  const double lo = 1.2e-4, hi = 0.039;
  const int points = 30;
  for (int i = 0; i < points; ++i) {
    const double eps =
        std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * i / (points - 1));
    const HardnessPoint p = hardness_pair(eps);
    if (!p.pass) {
      return {false, strf("H^2 = %.6g fails to clear 7.5*eps = %.6g at eps = %.6g",
                          p.h2, p.lower, eps)};
    }
  }
  const HardnessPoint tip = hardness_pair(1e-4);
  const double limit = 24.0 - std::log(25.0);
  const double rel = std::fabs(tip.kl / tip.eps - limit) / limit;
  if (!(rel <= 0.005)) {
    return {false, strf("KL/eps at 1e-4 is %.6f, %.3f%% from %.6f (allow 0.5%%)",
                        tip.kl / tip.eps, 100.0 * rel, limit)};
  }
  return {true, strf("30/30 grid points clear the floor; KL/eps at 1e-4 = %.6f "
                     "within %.3f%% of %.6f",
                     tip.kl / tip.eps, 100.0 * rel, limit)};
}

// 12. Reproducibility: the train and sample subcommands rerun with an
//     identical config produce bitwise-identical outputs.
Outcome criterion_reproducibility() {
  const char* bin = std::getenv("DISCORE_BIN");
  if (!bin) return {false, "DISCORE_BIN must point at the CLI binary"};
  const fs::path base =
      fs::temp_directory_path() / ("discore_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(base);
  fs::create_directories(base);
  const fs::path cfg = base / "tiny.cfg";
  {
    std::ofstream f(cfg);
    f << "S = 2\nd = 1\nT = 1.0\nh = 0.5\nK = 2\nepochs = 2\nn_k = 64\n"
         "batch = 32\nwidth = 8\ndepth = 2\neta = 0.05\np0 = product:0.7,0.3\n"
         "n_samples = 300\nseed_dataset = 1\nseed_train = 2\nseed_sample = 3\n";
  }
  const fs::path dir_a = base / "a";
  const fs::path dir_b = base / "b";
  for (const fs::path& dir : {dir_a, dir_b}) {
    const CmdResult t = run_cmd(std::string(bin) + " train --config '" + cfg.string() +
                                "' --out '" + dir.string() + "'");
    if (t.code != 0) return {false, "train exited " + std::to_string(t.code)};
    const CmdResult s = run_cmd(std::string(bin) + " sample --config '" + cfg.string() +
                                "' --out '" + dir.string() + "'");
    if (s.code != 0) return {false, "sample exited " + std::to_string(s.code)};
  }
  const char* files[] = {"dataset.txt", "net_000.ckpt", "net_001.ckpt",
                         "train_log.csv", "samples.txt"};
  for (const char* name : files) {
    if (file_bytes(dir_a / name) != file_bytes(dir_b / name)) {
      return {false, std::string(name) + " differs between identical reruns"};
    }
  }
  fs::remove_all(base);
  return {true, "dataset, both checkpoints, training log, and samples are "
                "bitwise identical across reruns"};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    double limit_s;
    std::function<Outcome()> body;
  };
  const std::vector<Criterion> criteria = {
      {1, 30.0, criterion_forward},
      {2, 60.0, criterion_score_oracle},
      {3, 10.0, criterion_bregman},
      {4, 30.0, criterion_gradients},
      {5, 30.0, criterion_interpolation},
      {6, 60.0, criterion_sampler},
      {7, 60.0, criterion_error_terms},
      {8, 30.0, criterion_truncation},
      {9, 120.0, criterion_discretization},
      {10, 600.0, criterion_sweep},
      {11, 1.0, criterion_hardness},
      {12, 120.0, criterion_reproducibility},
  };

  int failures = 0;
  for (const Criterion& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.body();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs > c.limit_s) {
      out.pass = false;
      out.detail = strf("runtime %.1f s exceeds the %.0f s limit; ", secs, c.limit_s) +
                   out.detail;
    }
    if (!out.pass) ++failures;
    std::printf("criterion %02d %s (%.2f s; limit %.0f s) - %s\n", c.id,
                out.pass ? "PASS" : "FAIL", secs, c.limit_s, out.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("acceptance: %d of %zu criteria pass\n",
              static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
