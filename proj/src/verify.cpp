#include "discore/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <functional>
#include <ostream>
#include <utility>

#include "discore/bregman.hpp"
#include "discore/diagnostics.hpp"
#include "discore/forward.hpp"
#include "discore/rng.hpp"
#include "discore/score.hpp"
#include "discore/score_net.hpp"
#include "discore/state_space.hpp"

#include "verify_internal.hpp"

namespace discore {

namespace verify_internal {

std::string strf(const char* format, ...) {
  char buf[512];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof buf, format, args);
  va_end(args);
  return buf;
}

void run_check(SuiteResult& suite, const std::string& name,
               const std::function<std::string()>& body) {
  CheckResult r;
  r.name = name;
  try {
    r.detail = body();
    r.pass = true;
  } catch (const CheckFailure& e) {
    r.pass = false;
    r.detail = e.what();
  } catch (const std::exception& e) {
    r.pass = false;
    r.detail = std::string("exception: ") + e.what();
  }
  suite.checks.push_back(std::move(r));
}

DistTable random_dist(StateSpace sp, Rng& rng, double lo, double hi) {
  std::vector<double> p(sp.table_size());
  for (double& v : p) v = rng.uniform(lo, hi);
  DistTable t(sp, std::move(p));
  t.renormalize();
  return t;
}

}  // namespace verify_internal

using verify_internal::CheckFailure;
using verify_internal::fail_check;
using verify_internal::random_dist;
using verify_internal::run_check;
using verify_internal::strf;

// --- state_process ----------------------------------------------------------

namespace {

// Row-major S x S product of two token kernels.
std::vector<double> kernel_product(const TokenKernel& a, const TokenKernel& b) {
  const int S = a.S;
  std::vector<double> out(static_cast<size_t>(S) * S, 0.0);
  for (int i = 0; i < S; ++i) {
    for (int k = 0; k < S; ++k) {
      const double aik = a.p[static_cast<size_t>(i) * S + k];
      for (int j = 0; j < S; ++j) {
        out[static_cast<size_t>(i) * S + j] += aik * b.p[static_cast<size_t>(k) * S + j];
      }
    }
  }
  return out;
}

}  // namespace

SuiteResult verify_state_process(const RunConfig&) {
  SuiteResult suite{"state_process", {}};

  run_check(suite, "semigroup", [] {
    double worst = 0.0;
    const std::pair<double, double> times[] = {{0.3, 0.7}, {1.2, 2.3}, {0.05, 0.05}};
    for (int S : {2, 3, 5}) {
      for (const auto& [s, t] : times) {
        const std::vector<double> prod = kernel_product(token_kernel(S, s), token_kernel(S, t));
        const TokenKernel direct = token_kernel(S, s + t);
        for (size_t i = 0; i < prod.size(); ++i) {
          worst = std::max(worst, std::fabs(prod[i] - direct.p[i]));
        }
      }
    }
    if (worst > 1e-10) fail_check(strf("kernel composition deviates by %.3g > 1e-10", worst));
    return strf("max entrywise deviation %.3g over 9 (S, s, t) cases", worst);
  });

  run_check(suite, "forward-consistency", [] {
    Rng rng(411);
    double worst = 0.0;
    const StateSpace spaces[] = {{3, 2}, {2, 3}, {4, 2}};
    const std::pair<double, double> times[] = {{0.4, 0.9}, {0.1, 2.0}};
    for (const StateSpace& sp : spaces) {
      const DistTable p0 = random_dist(sp, rng, 0.02, 1.0);
      for (const auto& [s, t] : times) {
        const DistTable direct = forward_marginal(p0, s + t);
        const DistTable chained = forward_marginal(forward_marginal(p0, s), t);
        for (size_t i = 0; i < direct.p.size(); ++i) {
          worst = std::max(worst, std::fabs(direct.p[i] - chained.p[i]));
        }
      }
    }
    if (worst > 1e-10) fail_check(strf("two-step marginal deviates by %.3g > 1e-10", worst));
    return strf("max state deviation %.3g over 6 (p0, s, t) cases", worst);
  });

  run_check(suite, "mc-agreement", [] {
    const long n_draws = 100000;
    double worst = 0.0;
    struct Case {
      StateSpace sp;
      double t;
    };
    // Concentrated laws keep the expected multinomial TV well under the 0.01
    // budget at 10^5 draws (diffuse laws over 64 states sit near the edge).
    const Case cases[] = {{{4, 3}, 0.4}, {{2, 1}, 1.0}};
    Rng rng(902);
    for (const Case& c : cases) {
      const DistTable p0 = c.sp.d == 3 ? DistTable::delta(c.sp, {1, 2, 3})
                                       : random_dist(c.sp, rng, 0.25, 1.0);
      const DistTable exact = forward_marginal(p0, c.t);
      const TokenKernel kernel = token_kernel(c.sp.S, c.t);
      Dataset starts = draw_dataset(p0, n_draws, rng);
      std::vector<double> counts(c.sp.table_size(), 0.0);
      for (const StateVector& x0 : starts.rows) {
        counts[index_of(c.sp, sample_forward(x0, kernel, rng))] += 1.0;
      }
      DistTable emp(c.sp, std::move(counts));
      emp.renormalize();
      worst = std::max(worst, tv_distance(emp, exact));
    }
    if (worst > 0.01) fail_check(strf("TV(empirical, exact) = %.4f > 0.01", worst));
    return strf("max TV %.4f over 2 configurations, 10^5 draws each", worst);
  });

  run_check(suite, "rate-kernel-link", [] {
    double worst_ratio = 0.0;
    for (int S : {2, 4}) {
      const std::vector<double> q = token_rate(S);
      for (double eps : {1e-3, 1e-4}) {
        const TokenKernel k = token_kernel(S, eps);
        double dev = 0.0;
        for (int i = 0; i < S; ++i) {
          for (int j = 0; j < S; ++j) {
            const double finite =
                (k.p[static_cast<size_t>(i) * S + j] - (i == j ? 1.0 : 0.0)) / eps;
            dev = std::max(dev, std::fabs(finite - q[static_cast<size_t>(i) * S + j]));
          }
        }
        worst_ratio = std::max(worst_ratio, dev / (2.0 * eps));
      }
    }
    if (worst_ratio > 1.0) {
      fail_check(strf("finite-difference generator off by %.3g x the 2*eps budget", worst_ratio));
    }
    return strf("worst deviation %.2f of the 2*eps allowance", worst_ratio);
  });

  return suite;
}

// --- score_oracle -----------------------------------------------------------

SuiteResult verify_score_oracle(const RunConfig&) {
  SuiteResult suite{"score_oracle", {}};

  run_check(suite, "ratio-bound", [] {
    Rng rng(7001);
    int violations = 0;
    double worst_excess = 0.0;
    const int n_laws = 100, n_times = 20;
    for (int i = 0; i < n_laws; ++i) {
      const int S = 2 + static_cast<int>(rng.bounded(3));
      const int d = 1 + static_cast<int>(rng.bounded(3));
      const StateSpace sp(S, d);
      const DistTable p0 = random_dist(sp, rng, 0.05, 1.0);
      const double B = score_bound(p0).B;
      for (int j = 0; j < n_times; ++j) {
        const double t =
            std::exp(std::log(1e-3) + j * (std::log(50.0) - std::log(1e-3)) / (n_times - 1));
        const BoundCheck chk = check_score_bound(true_score(p0, t), B);
        if (!chk.pass) {
          ++violations;
          worst_excess = std::max(worst_excess, chk.worst_excess);
        }
      }
    }
    if (violations > 0) {
      fail_check(strf("%d of %d tables leave [1/B, B] (worst excess %.3g)", violations,
                      n_laws * n_times, worst_excess));
    }
    return strf("0 violations over %d laws x %d times", n_laws, n_times);
  });

  run_check(suite, "reciprocity", [] {
    Rng rng(7002);
    double worst = 0.0;
    const StateSpace spaces[] = {{3, 2}, {2, 3}};
    for (const StateSpace& sp : spaces) {
      const DistTable p0 = random_dist(sp, rng, 0.05, 1.0);
      for (double t : {0.05, 0.5, 3.0}) {
        const ScoreTable s = true_score(p0, t);
        const int64_t n = sp.table_size();
        for (int64_t x = 0; x < n; ++x) {
          const StateVector xv = state_of(sp, x);
          for (int i = 0; i < sp.d; ++i) {
            for (int slot = 0; slot < sp.S - 1; ++slot) {
              const int a = ScoreTable::symbol_of(slot, xv[i]);
              StateVector yv = xv;
              yv[i] = a;
              const int64_t y = index_of(sp, yv);
              const double prod =
                  s.at(x, i, slot) * s.at(y, i, ScoreTable::slot_of(xv[i], a));
              worst = std::max(worst, std::fabs(prod - 1.0));
            }
          }
        }
      }
    }
    if (worst > 1e-9) fail_check(strf("paired-ratio product off one by %.3g > 1e-9", worst));
    return strf("max |product - 1| = %.3g over 6 score tables", worst);
  });

  run_check(suite, "detailed-balance", [] {
    Rng rng(7003);
    double worst = 0.0;
    const StateSpace spaces[] = {{3, 2}, {2, 3}};
    for (const StateSpace& sp : spaces) {
      const DistTable p0 = random_dist(sp, rng, 0.05, 1.0);
      for (double t : {0.2, 1.5}) {
        const DistTable q = forward_marginal(p0, t);
        const std::vector<double> gen = reverse_generator(true_score(p0, t));
        const int64_t n = sp.table_size();
        for (int64_t x = 0; x < n; ++x) {
          const StateVector xv = state_of(sp, x);
          for (int64_t y = 0; y < n; ++y) {
            if (hamming(xv, state_of(sp, y)) != 1) continue;
            // Flow balance: q(x) * reverse_rate(x -> y) = q(y) * forward_rate(y -> x),
            // and the forward rate between neighbors is the constant 1/S.
            const double lhs = q.p[x] * gen[static_cast<size_t>(x) * n + y];
            const double rhs = q.p[y] / sp.S;
            worst = std::max(worst, std::fabs(lhs - rhs));
          }
        }
      }
    }
    if (worst > 1e-10) fail_check(strf("flow imbalance %.3g > 1e-10", worst));
    return strf("max |q(x) rate(x,y) - q(y)/S| = %.3g over 4 tables", worst);
  });

  run_check(suite, "movement-slope", [] {
    Rng rng(7004);
    const StateSpace sp(2, 2);
    const DistTable p0 = random_dist(sp, rng, 0.2, 1.0);
    const double t_end = 0.8;
    const double hs[] = {0.2, 0.1, 0.05, 0.025};
    std::vector<double> log_h, log_m;
    const ScoreTable s_end = true_score(p0, t_end);
    for (double h : hs) {
      double movement = 0.0;
      const int nodes = 33;
      for (int i = 0; i < nodes; ++i) {
        const double t = t_end - h + h * i / (nodes - 1);
        const ScoreTable s = true_score(p0, t);
        for (size_t e = 0; e < s.v.size(); ++e) {
          movement = std::max(movement, std::fabs(s.v[e] - s_end.v[e]));
        }
      }
      log_h.push_back(std::log(h));
      log_m.push_back(std::log(movement));
    }
    const double slope = least_squares(log_h, log_m).slope;
    if (slope < 0.8 || slope > 1.2) {
      fail_check(strf("score movement scales as h^%.2f, outside [0.8, 1.2]", slope));
    }
    return strf("movement ~ h^%.3f over h in {0.2, 0.1, 0.05, 0.025}", slope);
  });

  return suite;
}

// --- bregman_loss -----------------------------------------------------------

namespace {

double sq_norm_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double acc = 0.0;
  for (size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
  return acc;
}

std::vector<double> random_box(Rng& rng, int m, double lo, double hi) {
  std::vector<double> v(m);
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

}  // namespace

SuiteResult verify_bregman_loss(const RunConfig&) {
  SuiteResult suite{"bregman_loss", {}};
  const double C = 3.0;
  const int m = 6;
  const int n_trials = 10000;

  run_check(suite, "convexity-sandwich", [&] {
    Rng rng(31001);
    int violations = 0;
    for (int i = 0; i < n_trials; ++i) {
      const auto x = random_box(rng, m, 1.0 / C, C);
      const auto y = random_box(rng, m, 1.0 / C, C);
      const double div = bregman_div(x, y);
      const double sq = sq_norm_diff(x, y);
      if (div < sq / (2.0 * C) - 1e-12 || div > sq * C / 2.0 + 1e-12) ++violations;
    }
    if (violations > 0) fail_check(strf("%d of %d pairs break the sandwich", violations, n_trials));
    return strf("0 violations over %d pairs in [1/%.0f, %.0f]^%d", n_trials, C, C, m);
  });

  run_check(suite, "triangle-i", [&] {
    Rng rng(31002);
    int violations = 0;
    for (int i = 0; i < n_trials; ++i) {
      const auto x = random_box(rng, m, 1.0 / C, C);
      const auto y = random_box(rng, m, 1.0 / C, C);
      const auto z = random_box(rng, m, 1.0 / C, C);
      const double lhs = bregman_div(x, y);
      const double rhs = C * sq_norm_diff(x, z) + 2.0 * C * C * bregman_div(z, y);
      if (lhs > rhs + 1e-12) ++violations;
    }
    if (violations > 0) fail_check(strf("%d of %d triples break the bound", violations, n_trials));
    return strf("0 violations over %d triples", n_trials);
  });

  run_check(suite, "triangle-ii", [&] {
    Rng rng(31003);
    int violations = 0;
    for (int i = 0; i < n_trials; ++i) {
      const auto x = random_box(rng, m, 1.0 / C, C);
      const auto y = random_box(rng, m, 1.0 / C, C);
      const auto z = random_box(rng, m, 1.0 / C, C);
      const double lhs = bregman_div(x, y);
      const double rhs = C * sq_norm_diff(x, z) + C * C * C * sq_norm_diff(z, y);
      if (lhs > rhs + 1e-12) ++violations;
    }
    if (violations > 0) fail_check(strf("%d of %d triples break the bound", violations, n_trials));
    return strf("0 violations over %d triples", n_trials);
  });

  run_check(suite, "loss-identity", [] {
    Rng rng(31004);
    const int S = 3;
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
      const auto r = random_box(rng, 4, 0.1, 4.0);
      const auto shat = random_box(rng, 4, 0.1, 4.0);
      const double lhs = se_sample_loss(S, shat, r) - se_loss_constant(S, r);
      const double rhs = bregman_div(r, shat) / S;
      worst = std::max(worst, std::fabs(lhs - rhs));
    }
    if (worst > 1e-10) fail_check(strf("loss minus constant differs from the divergence by %.3g", worst));
    return strf("max identity residual %.3g over 1000 draws", worst);
  });

  return suite;
}

// --- score_net --------------------------------------------------------------

namespace {

// Loss only, no gradient; used as the finite-difference oracle.
double loss_only(const ScoreNet& net, const Batch& batch) {
  double acc = 0.0;
  for (size_t s = 0; s < batch.x.size(); ++s) {
    const std::vector<double> shat = forward_raw(net, batch.x[s]);
    for (size_t j = 0; j < shat.size(); ++j) {
      acc += -batch.r[s][j] * std::log(shat[j]) + shat[j];
    }
  }
  return acc / (static_cast<double>(batch.x.size()) * net.S);
}

StateVector random_state(const StateSpace& sp, Rng& rng) {
  StateVector x(sp.d);
  for (int i = 0; i < sp.d; ++i) x[i] = static_cast<int>(rng.bounded(sp.S));
  return x;
}

}  // namespace

SuiteResult verify_score_net(const RunConfig& cfg) {
  SuiteResult suite{"score_net", {}};

  run_check(suite, "gradient-check", [] {
    Rng rng(50100);
    double worst_rel = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
      const int depth = (trial % 2) ? 3 : 2;
      const int width = (trial % 4 < 2) ? 8 : 32;
      const int S = (trial % 3) ? 2 : 3;
      const int d = (trial % 5 < 3) ? 1 : 2;
      ScoreNet net = net_init(S, d, width, depth, 10.0, 0.7, 50200 + trial);
      const StateSpace sp(S, d);
      Batch batch;
      for (int s = 0; s < 3; ++s) {
        batch.x.push_back(random_state(sp, rng));
        batch.r.push_back(random_box(rng, net.out_dim(), 0.2, 3.0));
      }
      NetGrad grad;
      loss_grad(net, batch, grad);

      const double step = 1e-5;
      double max_diff = 0.0, max_mag = 0.0;
      for (int l = 0; l < net.depth; ++l) {
        for (int part = 0; part < 2; ++part) {
          std::vector<double>& params = part ? net.b[l] : net.w[l];
          const std::vector<double>& g = part ? grad.b[l] : grad.w[l];
          for (size_t i = 0; i < params.size(); ++i) {
            const double saved = params[i];
            params[i] = saved + step;
            const double up = loss_only(net, batch);
            params[i] = saved - step;
            const double down = loss_only(net, batch);
            params[i] = saved;
            const double fd = (up - down) / (2.0 * step);
            max_diff = std::max(max_diff, std::fabs(fd - g[i]));
            max_mag = std::max({max_mag, std::fabs(fd), std::fabs(g[i])});
          }
        }
      }
      worst_rel = std::max(worst_rel, max_diff / std::max(max_mag, 1e-12));
    }
    if (worst_rel > 1e-5) {
      fail_check(strf("gradient vs finite differences: relative error %.3g > 1e-5", worst_rel));
    }
    return strf("max relative error %.3g over 20 nets (depths 2-3, widths 8/32)", worst_rel);
  });

  run_check(suite, "clip-contraction", [&cfg] {
    const double C = cfg.clip != 0.0 ? cfg.clip : 2.5;
    double worst = 0.0;
    for (int iv = 0; iv <= 400; ++iv) {
      const double v = 0.01 + iv * (10.0 - 0.01) / 400.0;
      const double clipped = clip_score(C, {v})[0];
      for (int is = 0; is <= 60; ++is) {
        const double s = 1.0 / C + is * (C - 1.0 / C) / 60.0;
        const double excess = std::fabs(clipped - s) - std::fabs(v - s);
        worst = std::max(worst, excess);
      }
    }
    if (worst > 1e-15) fail_check(strf("clipping moved a point away from a target by %.3g", worst));
    return strf("contraction holds on a 401 x 61 (value, target) grid, C = %.3g", C);
  });

  run_check(suite, "sgd-determinism", [] {
    RunConfig tiny;
    tiny.S = 2;
    tiny.d = 1;
    tiny.T = 1.0;
    tiny.h = 0.5;
    tiny.K = 2;
    tiny.epochs = 3;
    tiny.n_k = 128;
    tiny.batch = 32;
    tiny.width = 8;
    tiny.eta = 0.05;
    Rng data_rng(42);
    const Dataset ds = draw_dataset(DistTable::uniform(StateSpace(2, 1)), 128, data_rng);
    const TrainResult a = train(ds, tiny, 2.0);
    const TrainResult b = train(ds, tiny, 2.0);
    for (int k = 0; k < tiny.K; ++k) {
      if (a.nets[k].w != b.nets[k].w || a.nets[k].b != b.nets[k].b) {
        fail_check(strf("re-run parameters differ at interval %d", k));
      }
    }
    for (size_t i = 0; i < a.log.size(); ++i) {
      if (a.log[i].loss != b.log[i].loss || a.log[i].t_drawn != b.log[i].t_drawn) {
        fail_check(strf("re-run training log differs at row %zu", i));
      }
    }
    return strf("two runs bitwise identical: %d nets, %zu log rows", tiny.K, a.log.size());
  });

  run_check(suite, "realizability", [] {
    Rng rng(50300);
    double worst_interp = 0.0, worst_net = 0.0;
    const StateSpace spaces[] = {{2, 2}, {3, 2}, {2, 4}, {4, 1}};
    for (const StateSpace& sp : spaces) {
      ScoreTable target(sp);
      for (double& v : target.v) v = rng.uniform(0.3, 3.0);

      // Direct interpolation of the raw table values over the one-hot
      // encodings; then the exp-output network built from the log table.
      ScoreNet probe = net_init(sp.S, sp.d, 1, 2, 10.0, 0.5, 1);
      const int64_t n = sp.table_size();
      std::vector<std::vector<double>> points(n, std::vector<double>(probe.in_dim()));
      for (int64_t i = 0; i < n; ++i) encode_input(probe, state_of(sp, i), points[i].data());
      std::vector<std::vector<double>> values(target.per_state(), std::vector<double>(n));
      for (int64_t i = 0; i < n; ++i) {
        for (int c = 0; c < target.per_state(); ++c) values[c][i] = target.row(i)[c];
      }
      const Interpolant interp = construct_interpolant(points, values, 50301);
      for (int64_t i = 0; i < n; ++i) {
        for (int c = 0; c < target.per_state(); ++c) {
          worst_interp =
              std::max(worst_interp, std::fabs(interp_eval(interp, points[i], c) - values[c][i]));
        }
      }

      const ScoreNet net = oracle_net(target, 0.5, 10.0, 50302);
      for (int64_t i = 0; i < n; ++i) {
        const std::vector<double> out = forward_raw(net, state_of(sp, i));
        for (int c = 0; c < target.per_state(); ++c) {
          worst_net = std::max(worst_net, std::fabs(out[c] - target.row(i)[c]));
        }
      }
    }
    if (worst_interp > 1e-8) {
      fail_check(strf("interpolant misses a table value by %.3g > 1e-8", worst_interp));
    }
    if (worst_net > 1e-7) {
      fail_check(strf("reconstruction network misses a table value by %.3g > 1e-7", worst_net));
    }
    return strf("interpolant error %.2g, network error %.2g over 4 state spaces", worst_interp,
                worst_net);
  });

  return suite;
}

// --- harness ----------------------------------------------------------------

const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names = {
      "state_process", "score_oracle",   "bregman_loss", "score_net",
      "trainer",       "reverse_sampler", "diagnostics",  "cli",
  };
  return names;
}

std::vector<SuiteResult> run_verify(const RunConfig& cfg,
                                    const std::vector<std::string>& which,
                                    const std::string& self_path) {
  std::vector<std::string> todo = which;
  if (todo.empty()) todo = suite_names();
  std::vector<SuiteResult> results;
  results.reserve(todo.size());
  for (const std::string& name : todo) {
    if (name == "state_process") results.push_back(verify_state_process(cfg));
    else if (name == "score_oracle") results.push_back(verify_score_oracle(cfg));
    else if (name == "bregman_loss") results.push_back(verify_bregman_loss(cfg));
    else if (name == "score_net") results.push_back(verify_score_net(cfg));
    else if (name == "trainer") results.push_back(verify_trainer(cfg));
    else if (name == "reverse_sampler") results.push_back(verify_reverse_sampler(cfg));
    else if (name == "diagnostics") results.push_back(verify_diagnostics(cfg));
    else if (name == "cli") results.push_back(verify_cli(cfg, self_path));
    else {
      std::string msg = "verify: unknown suite '" + name + "'; valid suites are:";
      for (const std::string& s : suite_names()) msg += " " + s;
      throw ConfigError(msg);
    }
  }
  return results;
}

void print_verify_report(const std::vector<SuiteResult>& results, std::ostream& out) {
  for (const SuiteResult& suite : results) {
    out << "suite " << suite.name;
    for (size_t i = suite.name.size(); i < 24; ++i) out << ' ';
    out << (suite.pass() ? "PASS" : "FAIL") << "\n";
    for (const CheckResult& c : suite.checks) {
      out << "  " << c.name;
      for (size_t i = c.name.size(); i < 26; ++i) out << ' ';
      out << (c.pass ? "PASS  " : "FAIL  ") << c.detail << "\n";
    }
  }
}

bool verify_all_pass(const std::vector<SuiteResult>& results) {
  for (const SuiteResult& s : results) {
    if (!s.pass()) return false;
  }
  return true;
}

}  // namespace discore
