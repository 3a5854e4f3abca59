#pragma once

#include <iosfwd>
#include <vector>

#include "discore/forward.hpp"
#include "discore/state_space.hpp"

namespace discore {

// Concrete score table: one strictly positive real per (state x, coordinate
// i, alternative symbol a != x^i). For each (x, i) the S-1 alternatives are
// stored in increasing symbol order with x^i skipped; the self-entry is never
// stored, and the aggregate sum is computed on demand.
struct ScoreTable {
  StateSpace space;
  std::vector<double> v;  // size S^d * d * (S-1), layout (state, i, slot)

  ScoreTable() = default;
  explicit ScoreTable(StateSpace sp);

  int alts() const { return space.S - 1; }
  int per_state() const { return space.d * (space.S - 1); }

  // Slot <-> symbol maps for a coordinate whose current symbol is xi.
  static int slot_of(int symbol, int xi) { return symbol - (symbol > xi ? 1 : 0); }
  static int symbol_of(int slot, int xi) { return slot + (slot >= xi ? 1 : 0); }

  double at(int64_t state, int i, int slot) const {
    return v[(static_cast<size_t>(state) * space.d + i) * alts() + slot];
  }
  double& at(int64_t state, int i, int slot) {
    return v[(static_cast<size_t>(state) * space.d + i) * alts() + slot];
  }
  const double* row(int64_t state) const {
    return v.data() + static_cast<size_t>(state) * per_state();
  }
  double* row(int64_t state) {
    return v.data() + static_cast<size_t>(state) * per_state();
  }

  // Per-state aggregate: sum of all d(S-1) entries at the state (the total
  // jump intensity the table induces there, up to the 1/S factor).
  double aggregate(int64_t state) const;
};

// True score at time t: entry (x, i, a) = q_t(x with coordinate i set to a) / q_t(x).
ScoreTable true_score(const DistTable& p0, double t);

// Same ratio construction from an already-computed marginal (must be
// strictly positive everywhere).
ScoreTable score_from_marginal(const DistTable& q);

// Ratio targets of one corrupted sample: r(j, a) = P[x0^j, a] / P[x0^j, xt^j]
// for a != xt^j, flattened in (coordinate, slot-relative-to-xt) order. The
// kernel must have t > 0 (at t = 0 the denominator can vanish).
std::vector<double> ratio_targets(const StateVector& x0, const StateVector& xt,
                                  const TokenKernel& kernel);

// B = max score ratio of p0, kappa_i = max/min of the i-th marginal,
// kappa_sq = sum of kappa_i^2, C = 1.5 * B (the fixed clip policy).
struct ScoreBoundReport {
  double B = 1.0;
  std::vector<double> kappa;
  double kappa_sq = 0.0;
  double C = 1.5;
};

ScoreBoundReport score_bound(const DistTable& p0);

// Bound audit: pass iff every entry lies in [1/B - slack, B + slack]; the
// worst violator is identified by (state, coordinate, symbol).
struct BoundCheck {
  bool pass = true;
  double worst_entry = 1.0;
  double worst_excess = 0.0;
  int64_t state = -1;
  int coord = -1;
  int symbol = -1;
};

BoundCheck check_score_bound(const ScoreTable& s, double B, double slack = 1e-9);

// Full S^d x S^d reverse-generator matrix: off-diagonal (x, y) at Hamming
// distance one (coordinate i) equals (1/S) * score(x)_{i, y^i}; diagonal is
// minus the row sum. Row-major.
std::vector<double> reverse_generator(const ScoreTable& s);

// Laplace-smoothed empirical distribution of a sample list: every state gets
// floor mass alpha/S^d before normalization, so the result has full support.
DistTable smoothed_empirical(StateSpace sp, const std::vector<StateVector>& rows,
                             double alpha = 1.0);

// Debug dump, state-index major: one line per (state, i, a) with the entry
// value. Format documented in docs/file-formats.md.
void write_score_csv(const ScoreTable& s, std::ostream& out);

}  // namespace discore
