#pragma once

#include <functional>
#include <span>
#include <vector>

#include "discore/state_space.hpp"

namespace discore {

// Arguments below this floor are rejected rather than clamped: a silent clamp
// would mask full-support violations upstream.
inline constexpr double kPositivityFloor = 1e-300;

// I(x) = sum x_i log x_i (negative entropy).
double neg_entropy(std::span<const double> x);

// Generalized I-divergence, the Bregman divergence of I:
//   D_I(x || y) = sum(-x_i + y_i + x_i log(x_i / y_i)).
double bregman_div(std::span<const double> x, std::span<const double> y);

// Score-entropy loss of one sample: (1/S) * sum_j,a (-r log s + s) over the
// d(S-1) components, evaluated on raw (unclipped) scores.
double se_sample_loss(int S, std::span<const double> raw, std::span<const double> targets);

// Mean of se_sample_loss over a batch.
double se_minibatch_loss(int S, const std::vector<std::vector<double>>& raw,
                         const std::vector<std::vector<double>>& targets);

// The theta-independent part dropped by the training loss:
//   (1/S) * sum(r - r log r);  se_sample_loss == bregman part + this.
double se_loss_constant(int S, std::span<const double> targets);

// Population loss of interval k with the truth frozen at t' = (k+1)h + delta:
//   integral over [kh+delta, (k+1)h+delta] of E_{x ~ q_t} D_I(s_{t'}(x) || net(x)) dt,
// computed by full enumeration and composite Simpson quadrature (17 nodes
// minimum), with the node count doubled until the value moves < tol.
using ScoreFn = std::function<std::vector<double>(int64_t state)>;

double population_se(const DistTable& p0, const ScoreFn& net_at, int k, double h,
                     double delta, double tol = 1e-8);

// Composite Simpson with node doubling, shared by the population oracle and
// the discretization diagnostics. m0 = initial subinterval count (even).
double simpson_adaptive(const std::function<double(double)>& f, double a, double b,
                        double tol, int m0 = 16, int m_cap = 1 << 14);

}  // namespace discore
