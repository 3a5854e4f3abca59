#pragma once

#include <cstdint>
#include <vector>

#include "discore/errors.hpp"

namespace discore {

// A state is a d-vector of symbols in {0, .., S-1}. Symbols are 0-indexed
// internally (a symbol k here is the k+1 of 1-indexed notation).
using StateVector = std::vector<int>;

// Dense enumeration (distribution tables, score tables, generator matrices)
// is only offered up to this many states; sampling paths have no such limit.
inline constexpr int64_t kEnumerationCap = int64_t{1} << 20;

struct StateSpace {
  int S = 2;  // alphabet size per coordinate
  int d = 1;  // number of coordinates

  StateSpace() = default;
  StateSpace(int S_, int d_);

  bool operator==(const StateSpace&) const = default;

  // S^d, guarded by the enumeration cap; throws CapError beyond it.
  int64_t table_size() const;
  bool within_cap() const;
};

// Mixed-radix index with coordinate 0 most significant.
int64_t index_of(const StateSpace& sp, const StateVector& x);
StateVector state_of(const StateSpace& sp, int64_t index);

int hamming(const StateVector& x, const StateVector& y);

// Dense probability table over all S^d states, indexed by index_of.
struct DistTable {
  StateSpace space;
  std::vector<double> p;

  DistTable() = default;
  DistTable(StateSpace sp, std::vector<double> probs);

  static DistTable uniform(StateSpace sp);
  static DistTable delta(StateSpace sp, const StateVector& x);

  // Scales entries to sum to exactly one; throws NumericError if the mass is
  // nonpositive or nonfinite.
  void renormalize();

  // Checks nonnegativity and |sum - 1| <= tol.
  void validate(double tol = 1e-12) const;
};

// Total variation distance (1/2) * sum |p - q|.
double tv_distance(const DistTable& a, const DistTable& b);

}  // namespace discore
