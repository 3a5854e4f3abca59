// Feed-forward score estimator with manual gradients.
//
// The network maps a corrupted state (one-hot per coordinate, plus one raw
// time slot) to d*(S-1) strictly positive ratio estimates, laid out exactly
// like a ScoreTable row: coordinate-major, alternatives ordered by
// ScoreTable::slot_of.  Hidden layers use tanh; the output layer applies
// exp to an affine map so raw outputs are positive by construction.
// Clipping to [1/C, C] happens at inference only -- training sees raw
// outputs, the sampler and the diagnostics see clipped ones.
//
// There is no autodiff here: loss_grad backpropagates the score-entropy
// minibatch loss by hand, and tanh interpolation (construct_interpolant,
// oracle_net) builds networks that reproduce a given table exactly, which
// the tests use as a realizability witness and as a fixed known-good score
// source.
#pragma once

#include <cstdint>
#include <vector>

#include "discore/errors.hpp"
#include "discore/score.hpp"
#include "discore/state_space.hpp"

namespace discore {

struct ScoreNet {
  int S = 2;
  int d = 1;
  int width = 16;      // hidden layer size (ignored when depth == 1)
  int depth = 2;       // number of affine layers; depth-1 tanh stages
  double clip_bound = 10.0;  // C: inference outputs live in [1/C, C]
  double query_time = 0.0;   // t' written into the time input slot
  uint64_t init_seed = 0;

  // w[l] is row-major (layer_out(l) x layer_in(l)); b[l] has layer_out(l)
  // entries.  Kept public so checkpointing and gradient checks can reach
  // the flat parameter vectors directly.
  std::vector<std::vector<double>> w;
  std::vector<std::vector<double>> b;

  int in_dim() const { return S * d + 1; }
  int out_dim() const { return d * (S - 1); }
  int layer_in(int l) const;
  int layer_out(int l) const;
  int64_t param_count() const;
};

// Fresh network with weights ~ Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in))
// drawn in layer/row/column order from Rng(init_seed), biases zero.
// Throws ConfigError for clip_bound <= 1 or nonpositive sizes.
ScoreNet net_init(int S, int d, int width, int depth, double clip_bound,
                  double query_time, uint64_t init_seed);

// Writes the net's input encoding of x into dst (in_dim slots): one-hot
// blocks per coordinate followed by the raw query time.
void encode_input(const ScoreNet& net, const StateVector& x, double* dst);

// Raw positive outputs exp(affine(...)), one per (coordinate, alternative).
std::vector<double> forward_raw(const ScoreNet& net, const StateVector& x);

// Componentwise clamp to [1/C, C].  C must exceed 1.
std::vector<double> clip_score(double clip_bound, std::vector<double> raw);
std::vector<double> forward_clipped(const ScoreNet& net, const StateVector& x);

// Dense table of the net's outputs over the whole state space (clipped by
// default); subject to the enumeration cap.
ScoreTable net_score_table(const ScoreNet& net, bool clipped = true);

// One minibatch: corrupted states and their ratio targets (per-state rows
// of length out_dim, same slot layout as the outputs).
struct Batch {
  std::vector<StateVector> x;
  std::vector<std::vector<double>> r;
};

struct NetGrad {
  std::vector<std::vector<double>> w;
  std::vector<std::vector<double>> b;
};

NetGrad zero_grad(const ScoreNet& net);

// Score-entropy minibatch loss and its exact gradient.  Loss per sample is
// (1/S) * sum_j (-r_j log s_j + s_j) on raw outputs s; the batch mean is
// returned and grad is overwritten with its parameter gradient.  The output
// layer shortcut dL/dz = (s - r) / (batch * S) makes the backward pass cheap.
double loss_grad(const ScoreNet& net, const Batch& batch, NetGrad& grad);

// In-place SGD update w -= eta * g.  Throws NumericError if any parameter
// stops being finite.
void sgd_step(ScoreNet& net, const NetGrad& grad, double eta);

// --- tanh interpolation -------------------------------------------------
//
// Scattered-data interpolant with one shared hidden layer: project the m
// points onto a random separating direction u, place one tanh ridge per
// point with shifts between consecutive sorted projections, and solve the
// m x m collocation system for the output weights of every component.  The
// steepness alpha doubles from 1 until the (rescaled) collocation matrix is
// comfortably invertible and the solved system reproduces the values to
// 1e-8; used to manufacture networks that hit a target table exactly.
struct Interpolant {
  std::vector<double> dir;                 // u, unit-free random direction
  double alpha = 1.0;                      // ridge steepness
  std::vector<double> shifts;              // one per interpolation point
  std::vector<std::vector<double>> out_w;  // per output component
};

// points: m rows of dimension n; values: one length-m vector per output
// component.  Throws NumericError if no separating direction is found in
// 64 draws or alpha exceeds 2^40 without meeting the residual/conditioning
// targets, CapError for m beyond 4096 (the solve is dense O(m^3)).
Interpolant construct_interpolant(const std::vector<std::vector<double>>& points,
                                  const std::vector<std::vector<double>>& values,
                                  uint64_t seed);

// Evaluates output component c of the interpolant at an arbitrary input:
// sum_k w_k tanh(alpha * (dir . x - shift_k)).
double interp_eval(const Interpolant& interp, const std::vector<double>& x, size_t c);

// Depth-2 network whose raw outputs reproduce `table` at query_time on
// every state (to interpolation accuracy): hidden width S^d, log-values
// interpolated per output component over the shared hidden layer.
ScoreNet oracle_net(const ScoreTable& table, double query_time,
                    double clip_bound, uint64_t seed = 7);

}  // namespace discore
