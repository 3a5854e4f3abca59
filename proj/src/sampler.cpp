#include "discore/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

#include "discore/forward.hpp"

namespace discore {

IntervalModel build_interval_model(const ScoreNet& net) {
  IntervalModel m;
  m.net = net;
  const StateSpace sp(net.S, net.d);
  if (sp.within_cap()) {
    m.dense = true;
    m.table = net_score_table(net, /*clipped=*/true);
    const int64_t n = sp.table_size();
    double best = 0.0;
    for (int64_t x = 0; x < n; ++x) best = std::max(best, m.table.aggregate(x));
    m.lambda_raw = best;
    m.lambda_exact = true;
  } else {
    m.dense = false;
    m.lambda_raw = net.clip_bound * net.d * (net.S - 1);
    m.lambda_exact = false;
  }
  return m;
}

std::vector<IntervalModel> build_reverse_models(const std::vector<ScoreNet>& nets) {
  std::vector<IntervalModel> models;
  models.reserve(nets.size());
  for (const ScoreNet& net : nets) models.push_back(build_interval_model(net));
  return models;
}

double lambda_k(const ScoreNet& net) { return build_interval_model(net).lambda_raw; }

namespace {

// Clipped score row of the current state: table lookup in dense mode,
// network query otherwise. The scratch vector avoids reallocation on the
// query path.
const double* score_row(const IntervalModel& model, const StateVector& z, int64_t idx,
                        std::vector<double>& scratch) {
  if (model.dense) return model.table.row(idx);
  scratch = forward_clipped(model.net, z);
  return scratch.data();
}

}  // namespace

long uniformization_interval(const IntervalModel& model, StateVector& z, double h,
                             double poisson_guard, Rng& rng, long* trials_out) {
  const ScoreNet& net = model.net;
  const int S = net.S;
  const int d = net.d;
  const int alts = S - 1;
  const StateSpace sp(S, d);
  const double mu = model.lambda_raw * h / S;
  if (!(mu <= poisson_guard)) {
    throw NumericError("uniformization: effective intensity * h = " + std::to_string(mu) +
                       " exceeds the Poisson guard " + std::to_string(poisson_guard));
  }

  const long trials = rng.poisson(mu);
  if (trials_out) *trials_out = trials;
  long flips = 0;
  int64_t idx = model.dense ? index_of(sp, z) : 0;
  std::vector<double> scratch;
  for (long j = 0; j < trials; ++j) {
    const double* row = score_row(model, z, idx, scratch);
    double aggregate = 0.0;
    for (int e = 0; e < d * alts; ++e) aggregate += row[e];
    if (aggregate > model.lambda_raw * (1.0 + 1e-12)) {
      throw NumericError(
          "uniformization: state aggregate exceeds the dominating rate (negative residual)");
    }
    // One uniform decides the trial: a linear scan over the d(S-1) jump
    // probabilities score/lambda_raw, with the residual mass meaning "stay".
    const double target = rng.uniform() * model.lambda_raw;
    double acc = 0.0;
    int hit = -1;
    for (int e = 0; e < d * alts; ++e) {
      acc += row[e];
      if (target < acc) {
        hit = e;
        break;
      }
    }
    if (hit >= 0) {
      const int i = hit / alts;
      const int symbol = ScoreTable::symbol_of(hit % alts, z[i]);
      if (model.dense) {
        // Neighbor index differs only in coordinate i's digit.
        int64_t stride = 1;
        for (int c = d - 1; c > i; --c) stride *= S;
        idx += (symbol - z[i]) * stride;
      }
      z[i] = symbol;
      ++flips;
    }
  }
  return flips;
}

StateVector sample_reverse(const std::vector<IntervalModel>& models,
                           const SamplerConfig& cfg, Rng& rng,
                           std::vector<JumpRecord>* trace) {
  if (static_cast<int>(models.size()) < cfg.K) {
    throw ConfigError("sample_reverse: need K interval models");
  }
  if (cfg.K > 0 && !(cfg.h > 0.0)) throw ConfigError("sample_reverse: h must be positive");

  // z0 from the uniform stationary law, one bounded draw per coordinate.
  int S = 2, d = 1;
  if (cfg.K > 0) {
    S = models[cfg.K - 1].net.S;
    d = models[cfg.K - 1].net.d;
  } else if (!models.empty()) {
    S = models[0].net.S;
    d = models[0].net.d;
  }
  StateVector z(d);
  for (int i = 0; i < d; ++i) z[i] = static_cast<int>(rng.bounded(S));

  for (int k = 0; k < cfg.K; ++k) {
    const IntervalModel& model = models[cfg.K - 1 - k];
    long trials = 0;
    const long flips = uniformization_interval(model, z, cfg.h, cfg.poisson_guard, rng, &trials);
    if (trace) trace->push_back({k, model.lambda_raw / S, trials, flips});
  }
  return z;
}

DistTable exact_reverse_marginal(const std::vector<IntervalModel>& models,
                                 const SamplerConfig& cfg) {
  if (static_cast<int>(models.size()) < cfg.K) {
    throw ConfigError("exact_reverse_marginal: need K interval models");
  }
  StateSpace sp(2, 1);
  if (cfg.K > 0) {
    sp = StateSpace(models[cfg.K - 1].net.S, models[cfg.K - 1].net.d);
  } else if (!models.empty()) {
    sp = StateSpace(models[0].net.S, models[0].net.d);
  }
  DistTable p = stationary(sp);
  if (cfg.K == 0) return p;
  if (!(cfg.h > 0.0)) throw ConfigError("exact_reverse_marginal: h must be positive");

  const int S = sp.S;
  const int d = sp.d;
  const int alts = S - 1;
  const int64_t n = sp.table_size();

  std::vector<double> cur(n), next(n), out(n);
  std::vector<int64_t> strides(d);
  strides[d - 1] = 1;
  for (int i = d - 2; i >= 0; --i) strides[i] = strides[i + 1] * S;

  for (int k = 0; k < cfg.K; ++k) {
    const IntervalModel& model = models[cfg.K - 1 - k];
    if (!model.dense) {
      throw CapError("exact_reverse_marginal: state space exceeds the enumeration cap");
    }
    const double lambda = model.lambda_raw;
    const double mu = lambda * cfg.h / S;

    // Series sum_m w_m * (P^T)^m p with log-space Poisson weights; cur holds
    // (P^T)^m p, accumulated into out until the remaining tail mass is below
    // the cutoff. The iteration cap sits far beyond the Poisson bulk.
    std::copy(p.p.begin(), p.p.end(), cur.begin());
    std::fill(out.begin(), out.end(), 0.0);
    const long m_cap =
        static_cast<long>(mu + 40.0 * std::sqrt(mu + 1.0) + 200.0);
    double cum_weight = 0.0;
    StateVector x(d);
    for (long m = 0;; ++m) {
      const double log_w = -mu + m * std::log(std::max(mu, 1e-300)) - std::lgamma(m + 1.0);
      const double w = (mu == 0.0 && m == 0) ? 1.0 : std::exp(log_w);
      for (int64_t idx = 0; idx < n; ++idx) out[idx] += w * cur[idx];
      cum_weight += w;
      if (1.0 - cum_weight < cfg.tail_cutoff) break;
      if (m >= m_cap) {
        throw NumericError("exact_reverse_marginal: series cap reached before the tail cutoff");
      }

      // One application of P^T: scatter each state's mass to its neighbors
      // with probability score/lambda, keep the residual in place.
      std::fill(next.begin(), next.end(), 0.0);
      std::fill(x.begin(), x.end(), 0);
      for (int64_t idx = 0; idx < n; ++idx) {
        const double mass = cur[idx];
        const double* row = model.table.row(idx);
        double aggregate = 0.0;
        for (int i = 0; i < d; ++i) {
          for (int a = 0; a < alts; ++a) {
            const double s = row[i * alts + a];
            aggregate += s;
            const int symbol = ScoreTable::symbol_of(a, x[i]);
            next[idx + (symbol - x[i]) * strides[i]] += mass * s / lambda;
          }
        }
        if (aggregate > lambda * (1.0 + 1e-12)) {
          throw NumericError(
              "exact_reverse_marginal: aggregate exceeds the dominating rate");
        }
        next[idx] += mass * (1.0 - aggregate / lambda);
        // Advance the mixed-radix digit counter tracking state_of(idx).
        for (int i = d - 1; i >= 0; --i) {
          if (++x[i] < S) break;
          x[i] = 0;
        }
      }
      cur.swap(next);
    }
    std::copy(out.begin(), out.end(), p.p.begin());
    p.renormalize();
  }
  return p;
}

void write_jump_trace(const std::vector<JumpRecord>& trace, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw ConfigError("write_jump_trace: cannot open " + path);
  f << "k,lambda_k,N,flips\n";
  char buf[96];
  for (const JumpRecord& r : trace) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%ld,%ld\n", r.k, r.lambda, r.trials, r.flips);
    f << buf;
  }
  if (!f) throw ConfigError("write_jump_trace: write failed for " + path);
}

}  // namespace discore
