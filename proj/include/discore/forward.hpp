#pragma once

#include <vector>

#include "discore/rng.hpp"
#include "discore/state_space.hpp"

namespace discore {

// Per-token transition matrix of the uniform-flip chain over time t:
//   P_t = (1/S)(1 - e^{-t}) 11^T + e^{-t} I,
// the matrix exponential of t * Q_tok with Q_tok = (1/S) 11^T - I.
struct TokenKernel {
  int S = 0;
  double t = 0.0;
  std::vector<double> p;  // row-major S x S, p[from * S + to]

  const double* row(int from) const { return p.data() + static_cast<size_t>(from) * S; }
};

TokenKernel token_kernel(int S, double t);

// Q_tok as a dense row-major S x S matrix; rows sum to zero.
std::vector<double> token_rate(int S);

// Uniform bound on total departure rates of the global chain: d(S-1)/S.
double uniform_rate_bound(int S, int d);

DistTable stationary(StateSpace sp);

// Exact forward marginal q_t. The kernel factorizes over coordinates, so the
// d-fold sum over source states collapses to d single-coordinate
// contractions, O(d * S^{d+1}) instead of O(S^{2d}).
DistTable forward_marginal(const DistTable& p0, double t);

// One forward corruption draw: each coordinate sampled independently from its
// kernel row. RNG is consumed once per coordinate, in coordinate order.
StateVector sample_forward(const StateVector& x0, const TokenKernel& kernel, Rng& rng);

}  // namespace discore
