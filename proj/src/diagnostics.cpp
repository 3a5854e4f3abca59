#include "discore/diagnostics.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <thread>

#include "discore/bregman.hpp"
#include "discore/forward.hpp"
#include "discore/score.hpp"

namespace discore {

double kl_divergence(const DistTable& p, const DistTable& q) {
  if (!(p.space == q.space)) throw ConfigError("kl_divergence: state spaces differ");
  double acc = 0.0;
  for (size_t i = 0; i < p.p.size(); ++i) {
    const double pi = p.p[i];
    if (pi <= 0.0) continue;  // 0 log 0 := 0
    const double qi = q.p[i];
    if (qi <= 0.0) return std::numeric_limits<double>::infinity();
    acc += pi * std::log(pi / qi);
  }
  return std::max(acc, 0.0);  // guard tiny negative rounding at p ~= q
}

namespace {

double sq_dist(const double* a, const double* b, int m) {
  double acc = 0.0;
  for (int j = 0; j < m; ++j) {
    const double diff = a[j] - b[j];
    acc += diff * diff;
  }
  return acc;
}

}  // namespace

ErrorTerms error_terms(const DistTable& p0, const ScoreNet& net, int k, double h,
                       double delta) {
  if (k < 0 || !(h > 0.0) || delta < 0.0) {
    throw ConfigError("error_terms: need k >= 0, h > 0, delta >= 0");
  }
  const StateSpace sp(net.S, net.d);
  if (!(sp == p0.space)) throw ConfigError("error_terms: network does not match p0");
  const double t_query = (k + 1) * h + delta;
  const DistTable q = forward_marginal(p0, t_query);
  const ScoreTable truth = true_score(p0, t_query);
  const ScoreTable raw = net_score_table(net, /*clipped=*/false);
  const ScoreTable clipped = net_score_table(net, /*clipped=*/true);

  const int m = truth.per_state();
  ErrorTerms e;
  const int64_t n = sp.table_size();
  for (int64_t x = 0; x < n; ++x) {
    const double w = q.p[x];
    e.a += w * sq_dist(truth.row(x), clipped.row(x), m);
    e.b += w * sq_dist(truth.row(x), raw.row(x), m);
    e.c += w * sq_dist(raw.row(x), clipped.row(x), m);
  }
  return e;
}

TruncationReport truncation_error(const DistTable& p0, double T) {
  if (!(T >= 0.0)) throw ConfigError("truncation_error: T must be nonnegative");
  TruncationReport r;
  r.kl = kl_divergence(forward_marginal(p0, T), stationary(p0.space));
  r.bound = p0.space.d * std::exp(-T) * std::log(static_cast<double>(p0.space.S));
  return r;
}

DiscretizationReport discretization_gap(const DistTable& p0,
                                        const std::vector<ScoreNet>& nets, int K,
                                        double h, double delta, double tol) {
  if (K < 1 || static_cast<int>(nets.size()) < K) {
    throw ConfigError("discretization_gap: need K networks");
  }
  if (!(h > 0.0) || delta < 0.0) {
    throw ConfigError("discretization_gap: need h > 0 and delta >= 0");
  }
  const StateSpace sp = p0.space;
  const int64_t n = sp.table_size();
  const int S = sp.S;
  const int d = sp.d;

  DiscretizationReport rep;
  std::vector<double> f(n);
  for (int k = 0; k < K; ++k) {
    const double t_k = k * h + delta;
    const ScoreTable truth = true_score(p0, t_k);
    const ScoreTable clipped = net_score_table(nets[k], /*clipped=*/true);
    const int m = truth.per_state();
    for (int64_t x = 0; x < n; ++x) {
      f[x] = bregman_div(std::span<const double>(truth.row(x), m),
                         std::span<const double>(clipped.row(x), m));
    }

    const DistTable q_left = forward_marginal(p0, t_k);
    double left_mean = 0.0;
    for (int64_t x = 0; x < n; ++x) left_mean += q_left.p[x] * f[x];
    rep.dt += h * left_mean / S;

    auto integrand = [&](double t) {
      const DistTable q = forward_marginal(p0, t);
      double acc = 0.0;
      for (int64_t x = 0; x < n; ++x) acc += q.p[x] * f[x];
      return acc;
    };
    rep.ct += simpson_adaptive(integrand, t_k, t_k + h, tol) / S;
  }

  rep.gap = std::fabs(rep.ct - rep.dt);
  const double T = K * h + delta;
  const double C = nets[0].clip_bound;
  rep.bound = (S - 1) * d * C * uniform_rate_bound(S, d) * T * h / S;
  return rep;
}

HardnessPoint hardness_pair(double eps) {
  if (!(eps > 0.0) || !(eps < 0.04)) {
    throw ConfigError("hardness_pair: eps must lie strictly between 0 and 1/25");
  }
  HardnessPoint p;
  p.eps = eps;
  p.kl = (1.0 - eps) * std::log((1.0 - eps) / (1.0 - 25.0 * eps)) +
         eps * std::log(1.0 / 25.0);
  p.h2 = 1.0 - std::sqrt((1.0 - eps) * (1.0 - 25.0 * eps)) - 5.0 * eps;
  p.lower = 7.5 * eps;
  p.pass = p.h2 > p.lower;
  return p;
}

FitResult least_squares(const std::vector<double>& x, const std::vector<double>& y) {
  const size_t m = x.size();
  if (m != y.size() || m < 2) throw ConfigError("least_squares: need >= 2 paired points");
  double mx = 0.0, my = 0.0;
  for (size_t i = 0; i < m; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= m;
  my /= m;
  double sxx = 0.0, sxy = 0.0;
  for (size_t i = 0; i < m; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw ConfigError("least_squares: x values are all equal");
  FitResult fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  if (m > 2) {
    double rss = 0.0;
    for (size_t i = 0; i < m; ++i) {
      const double r = y[i] - (fit.intercept + fit.slope * x[i]);
      rss += r * r;
    }
    fit.stderr_slope = std::sqrt(rss / (m - 2) / sxx);
  }
  return fit;
}

namespace {

std::vector<double> ranks_of(const std::vector<double>& v) {
  const size_t m = v.size();
  std::vector<size_t> order(m);
  for (size_t i = 0; i < m; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return v[a] < v[b]; });
  std::vector<double> rank(m);
  size_t i = 0;
  while (i < m) {
    size_t j = i;
    while (j + 1 < m && v[order[j + 1]] == v[order[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (size_t t = i; t <= j; ++t) rank[order[t]] = avg;
    i = j + 1;
  }
  return rank;
}

}  // namespace

double spearman_rho(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw ConfigError("spearman_rho: need >= 2 paired points");
  }
  const std::vector<double> rx = ranks_of(x);
  const std::vector<double> ry = ranks_of(y);
  const size_t m = x.size();
  double mx = 0.0, my = 0.0;
  for (size_t i = 0; i < m; ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= m;
  my /= m;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (size_t i = 0; i < m; ++i) {
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
    sxy += (rx[i] - mx) * (ry[i] - my);
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) {
    throw ConfigError("spearman_rho: constant input has no rank correlation");
  }
  return sxy / std::sqrt(sxx * syy);
}

namespace {

SweepRow run_cell(const RunConfig& base, const DistTable& p0, int64_t n_k,
                  uint64_t seed) {
  const auto t0 = std::chrono::steady_clock::now();
  RunConfig cfg = base;
  cfg.n_k = n_k;
  // Every cell owns decorrelated streams derived from its sweep seed; two
  // cells with the same seed but different n_k share nothing downstream of
  // the dataset size.
  cfg.seed_dataset = derive_seed(seed, 1);
  cfg.seed_train = derive_seed(seed, 2);
  cfg.seed_sample = derive_seed(seed, 3);

  Rng data_rng(cfg.seed_dataset);
  const Dataset ds = draw_dataset(p0, n_k, data_rng);
  const ScoreBoundReport bound = score_bound(p0);
  const double C = cfg.clip > 0.0 ? cfg.clip : bound.C;
  const TrainResult tr = train(ds, cfg, C);

  SweepRow row;
  row.n_k = n_k;
  row.seed = seed;
  double err = 0.0;
  for (int k = 0; k < cfg.K; ++k) {
    err += error_terms(p0, tr.nets[k], k, cfg.h, cfg.delta).a;
  }
  row.mean_score_err = err / cfg.K;

  const std::vector<IntervalModel> models = build_reverse_models(tr.nets);
  SamplerConfig sampler{cfg.K, cfg.h, cfg.delta, cfg.poisson_guard, cfg.tail_cutoff};
  row.kl = kl_divergence(p0, exact_reverse_marginal(models, sampler));

  const auto t1 = std::chrono::steady_clock::now();
  row.wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
  return row;
}

}  // namespace

SweepResult run_sweep(const RunConfig& cfg, const DistTable& p0, int jobs) {
  cfg.validate();
  if (jobs < 1) throw ConfigError("run_sweep: jobs must be at least 1");
  const size_t cells = cfg.sweep_n.size() * cfg.sweep_seeds.size();

  SweepResult res;
  res.rows.resize(cells);
  std::atomic<size_t> cursor{0};
  auto worker = [&]() {
    for (;;) {
      const size_t idx = cursor.fetch_add(1);
      if (idx >= cells) return;
      const int64_t n_k = cfg.sweep_n[idx / cfg.sweep_seeds.size()];
      const uint64_t seed = cfg.sweep_seeds[idx % cfg.sweep_seeds.size()];
      res.rows[idx] = run_cell(cfg, p0, n_k, seed);
    }
  };
  if (jobs == 1 || cells == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    const size_t n_threads = std::min<size_t>(jobs, cells);
    pool.reserve(n_threads);
    for (size_t i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }

  std::vector<double> log_n, log_err;
  log_n.reserve(cells);
  log_err.reserve(cells);
  for (const SweepRow& row : res.rows) {
    log_n.push_back(std::log(static_cast<double>(row.n_k)));
    log_err.push_back(std::log(std::max(row.mean_score_err, 1e-300)));
  }
  res.fit = least_squares(log_n, log_err);

  std::vector<double> n_values;
  for (size_t g = 0; g < cfg.sweep_n.size(); ++g) {
    std::vector<double> kls;
    for (size_t s = 0; s < cfg.sweep_seeds.size(); ++s) {
      kls.push_back(res.rows[g * cfg.sweep_seeds.size() + s].kl);
    }
    std::sort(kls.begin(), kls.end());
    const size_t m = kls.size();
    res.median_kl.push_back(m % 2 ? kls[m / 2] : 0.5 * (kls[m / 2 - 1] + kls[m / 2]));
    n_values.push_back(static_cast<double>(cfg.sweep_n[g]));
  }
  res.spearman = cfg.sweep_n.size() >= 2 ? spearman_rho(n_values, res.median_kl) : 0.0;
  return res;
}

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw ConfigError("write_sweep_csv: cannot open " + path);
  f << "n_k,seed,mean_score_err,kl,wall_ms\n";
  char buf[160];
  for (const SweepRow& r : rows) {
    std::snprintf(buf, sizeof buf, "%lld,%llu,%.17g,%.17g,%.17g\n",
                  static_cast<long long>(r.n_k), static_cast<unsigned long long>(r.seed),
                  r.mean_score_err, r.kl, r.wall_ms);
    f << buf;
  }
  if (!f) throw ConfigError("write_sweep_csv: write failed for " + path);
}

}  // namespace discore
