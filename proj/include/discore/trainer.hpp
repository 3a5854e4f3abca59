// Score-entropy training loop.
//
// One independent network per time interval k, trained on minibatches of
// corrupted dataset samples: draw t uniformly inside interval k, corrupt
// each sample through the forward kernel at t, build the per-coordinate
// ratio targets at t, query network k at its frozen time t' = (k+1)h +
// delta, and take one SGD step on the score-entropy loss. Epochs are the
// outer loop, intervals the middle one, minibatches the inner one; every
// minibatch appends one row to the training log, so the log length proves
// exactly epochs * ceil(n_k / batch) updates per interval.
//
// All randomness is drawn from streams derived off seed_train (one init
// stream and one sampling stream per interval), which makes runs bitwise
// reproducible and keeps interval k's draws independent of the processing
// order of the other intervals.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "discore/score.hpp"
#include "discore/score_net.hpp"
#include "discore/state_space.hpp"

namespace discore {

// Flat run configuration shared by every subcommand; the config file is a
// key=value rendering of exactly these fields (see config.hpp for parsing
// and docs/file-formats.md for the key list).
struct RunConfig {
  int S = 2;
  int d = 1;
  double T = 2.5;      // diffusion horizon, must equal K*h + delta
  double h = 0.5;      // interval length
  double delta = 0.0;  // early-stop offset
  int K = 5;           // interval count
  double eta = 1e-2;   // SGD learning rate
  int batch = 32;      // minibatch size
  int epochs = 1;
  int64_t n_k = 1000;  // dataset samples available per interval
  int width = 16;
  int depth = 2;
  double clip = 0.0;  // explicit clip bound C; 0 selects the 1.5*B policy
  uint64_t seed_dataset = 1;
  uint64_t seed_train = 2;
  uint64_t seed_sample = 3;
  std::string p0 = "uniform";  // data law: uniform | delta:... | product:... | table:<path>
  std::string dataset;         // optional external dataset file (overrides p0 draws)
  int64_t n_samples = 10000;   // sample count for the sampling subcommand
  bool jump_trace = false;     // also emit the per-interval jump trace CSV
  bool oracle_scores = false;  // evaluation fixture: replace nets by true-score interpolants
  double poisson_guard = 1e3;  // max admissible lambda*h per interval
  double tail_cutoff = 1e-12;  // Poisson tail mass where the exact series stops
  std::vector<int64_t> sweep_n = {100, 1000, 10000, 100000};
  std::vector<uint64_t> sweep_seeds = {1, 2, 3, 4, 5};
  std::vector<double> hardness_eps;  // empty selects the built-in log grid
  std::string suites;                // verify subcommand: comma list, empty = all

  // Throws ConfigError on any violated invariant (T = K*h + delta within
  // 1e-12, h > 0, K >= 1, eta > 0, n_k >= batch, ...).
  void validate() const;
};

struct Dataset {
  StateSpace space;
  std::vector<StateVector> rows;
};

// n i.i.d. draws from the enumerated table by inverse-CDF over cumulative
// sums (one uniform per draw). Throws ConfigError for n = 0.
Dataset draw_dataset(const DistTable& p0, int64_t n, Rng& rng);

// One state per line, space-separated symbols; the same format the sampler
// emits, so outputs feed back in as datasets.
void write_dataset(const Dataset& ds, const std::string& path);
Dataset read_dataset(const std::string& path, StateSpace sp);

// Score bound of the data law: from the analytic table when one is given,
// otherwise from the Laplace-smoothed empirical law of the dataset (full
// support is needed for a finite B).
ScoreBoundReport resolve_bound(const DistTable* p0, const Dataset* ds,
                               double alpha = 1.0);

struct LogRow {
  int epoch = 0;
  int k = 0;
  double t_drawn = 0.0;
  double loss = 0.0;
};

void write_train_log(const std::vector<LogRow>& rows, const std::string& path);
std::vector<LogRow> read_train_log(const std::string& path);

struct TrainResult {
  std::vector<ScoreNet> nets;  // K networks, index k frozen at (k+1)h + delta
  std::vector<LogRow> log;     // execution order: epoch-major, then k, then minibatch
};

// Runs the full loop described at the top of this header. clip_bound is the
// resolved C (explicit config value or 1.5*B); a non-finite loss aborts with
// a NumericError naming the offending (epoch, interval, minibatch).
TrainResult train(const Dataset& ds, const RunConfig& cfg, double clip_bound);

}  // namespace discore
