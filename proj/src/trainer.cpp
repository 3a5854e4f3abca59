#include "discore/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "discore/forward.hpp"
#include "discore/rng.hpp"

namespace discore {

void RunConfig::validate() const {
  if (S < 2) throw ConfigError("config: S must be at least 2");
  if (d < 1) throw ConfigError("config: d must be at least 1");
  if (!(h > 0.0)) throw ConfigError("config: h must be positive");
  if (K < 1) throw ConfigError("config: K must be at least 1");
  if (!(delta >= 0.0)) throw ConfigError("config: delta must be nonnegative");
  if (!std::isfinite(T) || std::fabs(T - (K * h + delta)) > 1e-12) {
    throw ConfigError("config: T must equal K*h + delta within 1e-12 (T=" +
                      std::to_string(T) + ", K*h+delta=" + std::to_string(K * h + delta) + ")");
  }
  if (!(eta > 0.0)) throw ConfigError("config: eta must be positive");
  if (batch < 1) throw ConfigError("config: batch must be at least 1");
  if (epochs < 0) throw ConfigError("config: epochs must be nonnegative");
  if (n_k < batch) throw ConfigError("config: n_k must be at least the batch size");
  if (depth < 1) throw ConfigError("config: depth must be at least 1");
  if (depth > 1 && width < 1) throw ConfigError("config: width must be positive");
  if (clip != 0.0 && !(clip > 1.0)) {
    throw ConfigError("config: clip must be 0 (auto) or greater than 1");
  }
  if (n_samples < 0) throw ConfigError("config: n_samples must be nonnegative");
  if (!(poisson_guard > 0.0)) throw ConfigError("config: poisson_guard must be positive");
  if (!(tail_cutoff > 0.0) || !(tail_cutoff < 1.0)) {
    throw ConfigError("config: tail_cutoff must lie in (0, 1)");
  }
  if (sweep_n.empty()) throw ConfigError("config: sweep_n must not be empty");
  for (int64_t n : sweep_n) {
    if (n < 1) throw ConfigError("config: sweep_n entries must be positive");
  }
  if (sweep_seeds.empty()) throw ConfigError("config: sweep_seeds must not be empty");
}

Dataset draw_dataset(const DistTable& p0, int64_t n, Rng& rng) {
  if (n <= 0) throw ConfigError("draw_dataset: sample count must be positive");
  p0.validate();
  const int64_t m = p0.space.table_size();
  std::vector<double> cum(m);
  double acc = 0.0;
  for (int64_t i = 0; i < m; ++i) {
    acc += p0.p[i];
    cum[i] = acc;
  }
  cum[m - 1] = 1.0;  // absorb rounding so the last state is always reachable

  Dataset ds;
  ds.space = p0.space;
  ds.rows.reserve(n);
  for (int64_t s = 0; s < n; ++s) {
    const double u = rng.uniform();
    const int64_t idx = std::upper_bound(cum.begin(), cum.end(), u) - cum.begin();
    ds.rows.push_back(state_of(p0.space, std::min(idx, m - 1)));
  }
  return ds;
}

void write_dataset(const Dataset& ds, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw ConfigError("write_dataset: cannot open " + path);
  for (const StateVector& row : ds.rows) {
    for (size_t i = 0; i < row.size(); ++i) {
      if (i) f << ' ';
      f << row[i];
    }
    f << '\n';
  }
  if (!f) throw ConfigError("write_dataset: write failed for " + path);
}

Dataset read_dataset(const std::string& path, StateSpace sp) {
  std::ifstream f(path);
  if (!f) throw ConfigError("read_dataset: cannot open " + path);
  Dataset ds;
  ds.space = sp;
  std::string line;
  int64_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream is(line);
    StateVector row;
    int sym;
    while (is >> sym) {
      if (sym < 0 || sym >= sp.S) {
        throw ConfigError("read_dataset: " + path + " line " + std::to_string(lineno) +
                          ": symbol out of range for S=" + std::to_string(sp.S));
      }
      row.push_back(sym);
    }
    if (!is.eof()) {
      throw ConfigError("read_dataset: " + path + " line " + std::to_string(lineno) +
                        ": malformed symbol");
    }
    if (static_cast<int>(row.size()) != sp.d) {
      throw ConfigError("read_dataset: " + path + " line " + std::to_string(lineno) +
                        ": expected " + std::to_string(sp.d) + " symbols, got " +
                        std::to_string(row.size()));
    }
    ds.rows.push_back(std::move(row));
  }
  return ds;
}

ScoreBoundReport resolve_bound(const DistTable* p0, const Dataset* ds, double alpha) {
  if (p0) return score_bound(*p0);
  if (!ds || ds->rows.empty()) {
    throw ConfigError("resolve_bound: need an analytic data law or a nonempty dataset");
  }
  return score_bound(smoothed_empirical(ds->space, ds->rows, alpha));
}

void write_train_log(const std::vector<LogRow>& rows, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw ConfigError("write_train_log: cannot open " + path);
  f << "epoch,k,t_drawn,loss\n";
  char buf[96];
  for (const LogRow& r : rows) {
    std::snprintf(buf, sizeof buf, "%d,%d,%.17g,%.17g\n", r.epoch, r.k, r.t_drawn, r.loss);
    f << buf;
  }
  if (!f) throw ConfigError("write_train_log: write failed for " + path);
}

std::vector<LogRow> read_train_log(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("read_train_log: cannot open " + path);
  std::string line;
  if (!std::getline(f, line) || line != "epoch,k,t_drawn,loss") {
    throw ConfigError("read_train_log: " + path + " has an unexpected header");
  }
  std::vector<LogRow> rows;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    LogRow r;
    char* end = nullptr;
    const char* s = line.c_str();
    r.epoch = static_cast<int>(std::strtol(s, &end, 10));
    if (end == s || *end != ',') throw ConfigError("read_train_log: malformed row: " + line);
    s = end + 1;
    r.k = static_cast<int>(std::strtol(s, &end, 10));
    if (end == s || *end != ',') throw ConfigError("read_train_log: malformed row: " + line);
    s = end + 1;
    r.t_drawn = std::strtod(s, &end);
    if (end == s || *end != ',') throw ConfigError("read_train_log: malformed row: " + line);
    s = end + 1;
    r.loss = std::strtod(s, &end);
    if (end == s) throw ConfigError("read_train_log: malformed row: " + line);
    rows.push_back(r);
  }
  return rows;
}

TrainResult train(const Dataset& ds, const RunConfig& cfg, double clip_bound) {
  cfg.validate();
  if (!(ds.space == StateSpace(cfg.S, cfg.d))) {
    throw ConfigError("train: dataset state space does not match the config");
  }
  if (ds.rows.empty()) throw ConfigError("train: empty dataset");

  TrainResult res;
  res.nets.reserve(cfg.K);
  std::vector<Rng> streams;
  streams.reserve(cfg.K);
  for (int k = 0; k < cfg.K; ++k) {
    // Stream 2k seeds interval k's parameter init, stream 2k+1 its batch and
    // corruption draws; interval k's randomness never depends on the others.
    res.nets.push_back(net_init(cfg.S, cfg.d, cfg.width, cfg.depth, clip_bound,
                                (k + 1) * cfg.h + cfg.delta,
                                derive_seed(cfg.seed_train, 2 * static_cast<uint64_t>(k))));
    streams.emplace_back(derive_seed(cfg.seed_train, 2 * static_cast<uint64_t>(k) + 1));
  }

  const int64_t updates = (cfg.n_k + cfg.batch - 1) / cfg.batch;
  res.log.reserve(static_cast<size_t>(cfg.epochs) * cfg.K * updates);
  const int64_t pool = static_cast<int64_t>(ds.rows.size());
  Batch batch;
  NetGrad grad;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (int k = 0; k < cfg.K; ++k) {
      Rng& rng = streams[k];
      ScoreNet& net = res.nets[k];
      const double t_lo = k * cfg.h + cfg.delta;
      const double t_hi = (k + 1) * cfg.h + cfg.delta;
      for (int64_t u = 0; u < updates; ++u) {
        // One fresh corruption time per minibatch. t = 0 would make the
        // ratio targets ill-defined (zero denominator); with delta = 0 and
        // k = 0 the uniform draw can in principle land exactly there, so
        // redraw in that measure-zero case.
        double t = rng.uniform(t_lo, t_hi);
        while (!(t > 0.0)) t = rng.uniform(t_lo, t_hi);
        const TokenKernel kernel = token_kernel(cfg.S, t);

        batch.x.clear();
        batch.r.clear();
        for (int s = 0; s < cfg.batch; ++s) {
          const StateVector& x0 =
              ds.rows[static_cast<size_t>(rng.bounded(static_cast<uint64_t>(pool)))];
          StateVector xt = sample_forward(x0, kernel, rng);
          batch.r.push_back(ratio_targets(x0, xt, kernel));
          batch.x.push_back(std::move(xt));
        }

        const double loss = loss_grad(net, batch, grad);
        if (!std::isfinite(loss)) {
          throw NumericError("training aborted: non-finite loss at epoch " +
                             std::to_string(epoch) + ", interval " + std::to_string(k) +
                             ", minibatch " + std::to_string(u));
        }
        try {
          sgd_step(net, grad, cfg.eta);
        } catch (const NumericError& e) {
          throw NumericError("training aborted at epoch " + std::to_string(epoch) +
                             ", interval " + std::to_string(k) + ", minibatch " +
                             std::to_string(u) + ": " + e.what());
        }
        res.log.push_back({epoch, k, t, loss});
      }
    }
  }
  return res;
}

}  // namespace discore
