#include "discore/score_net.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "discore/rng.hpp"

namespace discore {

int ScoreNet::layer_in(int l) const { return l == 0 ? in_dim() : width; }

int ScoreNet::layer_out(int l) const { return l == depth - 1 ? out_dim() : width; }

int64_t ScoreNet::param_count() const {
  int64_t n = 0;
  for (int l = 0; l < depth; ++l) {
    n += static_cast<int64_t>(layer_out(l)) * layer_in(l) + layer_out(l);
  }
  return n;
}

ScoreNet net_init(int S, int d, int width, int depth, double clip_bound,
                  double query_time, uint64_t init_seed) {
  if (S < 2 || d < 1) throw ConfigError("net_init: need S >= 2 and d >= 1");
  if (depth < 1) throw ConfigError("net_init: depth must be at least 1");
  if (depth > 1 && width < 1) throw ConfigError("net_init: hidden width must be positive");
  if (!(clip_bound > 1.0)) {
    throw ConfigError("net_init: clip bound must exceed 1 (got " +
                      std::to_string(clip_bound) + ")");
  }
  ScoreNet net;
  net.S = S;
  net.d = d;
  net.width = width;
  net.depth = depth;
  net.clip_bound = clip_bound;
  net.query_time = query_time;
  net.init_seed = init_seed;
  net.w.resize(depth);
  net.b.resize(depth);
  Rng rng(init_seed);
  for (int l = 0; l < depth; ++l) {
    const int rows = net.layer_out(l);
    const int cols = net.layer_in(l);
    const double lim = 1.0 / std::sqrt(static_cast<double>(cols));
    net.w[l].resize(static_cast<size_t>(rows) * cols);
    for (double& v : net.w[l]) v = rng.uniform(-lim, lim);
    net.b[l].assign(rows, 0.0);
  }
  return net;
}

void encode_input(const ScoreNet& net, const StateVector& x, double* dst) {
  if (static_cast<int>(x.size()) != net.d) {
    throw ConfigError("encode_input: state has wrong number of coordinates");
  }
  std::fill(dst, dst + net.in_dim(), 0.0);
  for (int i = 0; i < net.d; ++i) {
    if (x[i] < 0 || x[i] >= net.S) throw ConfigError("encode_input: symbol out of range");
    dst[i * net.S + x[i]] = 1.0;
  }
  dst[net.S * net.d] = net.query_time;
}

namespace {

// Full forward pass keeping every post-activation vector: acts[0] is the
// encoded input, acts[l+1] the output of layer l (tanh on hidden layers, exp
// on the last). The backward pass needs all of them.
void forward_acts(const ScoreNet& net, const double* in,
                  std::vector<std::vector<double>>& acts) {
  acts.resize(net.depth + 1);
  acts[0].assign(in, in + net.in_dim());
  for (int l = 0; l < net.depth; ++l) {
    const int rows = net.layer_out(l);
    const int cols = net.layer_in(l);
    acts[l + 1].resize(rows);
    const double* a = acts[l].data();
    const double* wl = net.w[l].data();
    for (int i = 0; i < rows; ++i) {
      double z = net.b[l][i];
      const double* wr = wl + static_cast<size_t>(i) * cols;
      for (int j = 0; j < cols; ++j) z += wr[j] * a[j];
      acts[l + 1][i] = (l == net.depth - 1) ? std::exp(z) : std::tanh(z);
    }
  }
}

void ensure_shape(const ScoreNet& net, NetGrad& grad) {
  grad.w.resize(net.depth);
  grad.b.resize(net.depth);
  for (int l = 0; l < net.depth; ++l) {
    grad.w[l].assign(net.w[l].size(), 0.0);
    grad.b[l].assign(net.b[l].size(), 0.0);
  }
}

}  // namespace

std::vector<double> forward_raw(const ScoreNet& net, const StateVector& x) {
  std::vector<double> in(net.in_dim());
  encode_input(net, x, in.data());
  std::vector<std::vector<double>> acts;
  forward_acts(net, in.data(), acts);
  return std::move(acts.back());
}

std::vector<double> clip_score(double clip_bound, std::vector<double> raw) {
  if (!(clip_bound > 1.0)) throw ConfigError("clip_score: clip bound must exceed 1");
  const double lo = 1.0 / clip_bound;
  for (double& v : raw) v = std::clamp(v, lo, clip_bound);
  return raw;
}

std::vector<double> forward_clipped(const ScoreNet& net, const StateVector& x) {
  return clip_score(net.clip_bound, forward_raw(net, x));
}

ScoreTable net_score_table(const ScoreNet& net, bool clipped) {
  const StateSpace sp(net.S, net.d);
  ScoreTable table(sp);
  const int64_t n = sp.table_size();
  for (int64_t idx = 0; idx < n; ++idx) {
    const StateVector x = state_of(sp, idx);
    const std::vector<double> out =
        clipped ? forward_clipped(net, x) : forward_raw(net, x);
    std::copy(out.begin(), out.end(), table.row(idx));
  }
  return table;
}

NetGrad zero_grad(const ScoreNet& net) {
  NetGrad g;
  ensure_shape(net, g);
  return g;
}

double loss_grad(const ScoreNet& net, const Batch& batch, NetGrad& grad) {
  const size_t bsz = batch.x.size();
  if (bsz == 0 || batch.r.size() != bsz) {
    throw ConfigError("loss_grad: empty batch or state/target count mismatch");
  }
  ensure_shape(net, grad);

  const int m = net.out_dim();
  const double scale = 1.0 / (static_cast<double>(bsz) * net.S);
  double loss = 0.0;
  std::vector<double> in(net.in_dim());
  std::vector<std::vector<double>> acts;
  std::vector<double> delta, delta_prev;

  for (size_t s = 0; s < bsz; ++s) {
    const std::vector<double>& r = batch.r[s];
    if (static_cast<int>(r.size()) != m) {
      throw ConfigError("loss_grad: target row has wrong length");
    }
    encode_input(net, batch.x[s], in.data());
    forward_acts(net, in.data(), acts);
    const std::vector<double>& shat = acts[net.depth];

    // Per-sample loss (1/S) sum_j (-r_j log s_j + s_j); the exp output makes
    // log s_j just the pre-activation, but recomputing via log keeps the
    // expression in one place.
    delta.resize(m);
    for (int j = 0; j < m; ++j) {
      loss += -r[j] * std::log(shat[j]) + shat[j];
      delta[j] = (shat[j] - r[j]) * scale;  // dLoss/dz at the output layer
    }

    for (int l = net.depth - 1; l >= 0; --l) {
      const int rows = net.layer_out(l);
      const int cols = net.layer_in(l);
      const double* a = acts[l].data();
      for (int i = 0; i < rows; ++i) {
        grad.b[l][i] += delta[i];
        double* gr = grad.w[l].data() + static_cast<size_t>(i) * cols;
        const double di = delta[i];
        for (int j = 0; j < cols; ++j) gr[j] += di * a[j];
      }
      if (l > 0) {
        delta_prev.assign(cols, 0.0);
        for (int i = 0; i < rows; ++i) {
          const double* wr = net.w[l].data() + static_cast<size_t>(i) * cols;
          const double di = delta[i];
          for (int j = 0; j < cols; ++j) delta_prev[j] += wr[j] * di;
        }
        for (int j = 0; j < cols; ++j) delta_prev[j] *= 1.0 - a[j] * a[j];
        delta.swap(delta_prev);
      }
    }
  }
  return loss * scale;  // == loss / (bsz * S)
}

void sgd_step(ScoreNet& net, const NetGrad& grad, double eta) {
  if (grad.w.size() != net.w.size() || grad.b.size() != net.b.size()) {
    throw ConfigError("sgd_step: gradient shape does not match the network");
  }
  for (int l = 0; l < net.depth; ++l) {
    if (grad.w[l].size() != net.w[l].size() || grad.b[l].size() != net.b[l].size()) {
      throw ConfigError("sgd_step: gradient shape does not match the network");
    }
    for (size_t i = 0; i < net.w[l].size(); ++i) {
      net.w[l][i] -= eta * grad.w[l][i];
      if (!std::isfinite(net.w[l][i])) {
        throw NumericError("sgd_step: weight became non-finite in layer " +
                           std::to_string(l));
      }
    }
    for (size_t i = 0; i < net.b[l].size(); ++i) {
      net.b[l][i] -= eta * grad.b[l][i];
      if (!std::isfinite(net.b[l][i])) {
        throw NumericError("sgd_step: bias became non-finite in layer " +
                           std::to_string(l));
      }
    }
  }
}

// --- tanh interpolation -----------------------------------------------------

namespace {

// Gauss-Jordan inverse with partial pivoting. Returns false on a (near-)
// singular pivot. n is small here (<= 4096 by the cap), dense O(n^3) is fine.
bool invert_dense(std::vector<double> a, int n, std::vector<double>& inv) {
  inv.assign(static_cast<size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) inv[static_cast<size_t>(i) * n + i] = 1.0;
  for (int col = 0; col < n; ++col) {
    int piv = col;
    double best = std::fabs(a[static_cast<size_t>(col) * n + col]);
    for (int r = col + 1; r < n; ++r) {
      const double cand = std::fabs(a[static_cast<size_t>(r) * n + col]);
      if (cand > best) {
        best = cand;
        piv = r;
      }
    }
    if (!(best > 0.0) || !std::isfinite(best)) return false;
    if (piv != col) {
      for (int j = 0; j < n; ++j) {
        std::swap(a[static_cast<size_t>(piv) * n + j], a[static_cast<size_t>(col) * n + j]);
        std::swap(inv[static_cast<size_t>(piv) * n + j], inv[static_cast<size_t>(col) * n + j]);
      }
    }
    const double scale = 1.0 / a[static_cast<size_t>(col) * n + col];
    for (int j = 0; j < n; ++j) {
      a[static_cast<size_t>(col) * n + j] *= scale;
      inv[static_cast<size_t>(col) * n + j] *= scale;
    }
    for (int r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = a[static_cast<size_t>(r) * n + col];
      if (f == 0.0) continue;
      for (int j = 0; j < n; ++j) {
        a[static_cast<size_t>(r) * n + j] -= f * a[static_cast<size_t>(col) * n + j];
        inv[static_cast<size_t>(r) * n + j] -= f * inv[static_cast<size_t>(col) * n + j];
      }
    }
  }
  return true;
}

double norm_inf(const std::vector<double>& a, int n) {
  double best = 0.0;
  for (int i = 0; i < n; ++i) {
    double row = 0.0;
    for (int j = 0; j < n; ++j) row += std::fabs(a[static_cast<size_t>(i) * n + j]);
    best = std::max(best, row);
  }
  return best;
}

}  // namespace

Interpolant construct_interpolant(const std::vector<std::vector<double>>& points,
                                  const std::vector<std::vector<double>>& values,
                                  uint64_t seed) {
  const int m = static_cast<int>(points.size());
  if (m < 1) throw ConfigError("construct_interpolant: no points");
  if (m > 4096) throw CapError("construct_interpolant: point count exceeds the dense-solve cap 4096");
  const int n = static_cast<int>(points[0].size());
  for (const auto& p : points) {
    if (static_cast<int>(p.size()) != n) {
      throw ConfigError("construct_interpolant: ragged point dimensions");
    }
  }
  for (const auto& vals : values) {
    if (static_cast<int>(vals.size()) != m) {
      throw ConfigError("construct_interpolant: value list length != point count");
    }
  }

  // Random direction whose projections separate all points. Distinct states
  // differ in some coordinate, so almost every direction works; 64 draws is
  // vastly more than enough and failure indicates duplicated points.
  Rng rng(seed);
  std::vector<double> dir(n);
  std::vector<double> proj(m);
  std::vector<int> order(m);
  bool separated = false;
  for (int attempt = 0; attempt < 64 && !separated; ++attempt) {
    for (double& u : dir) u = rng.uniform(-1.0, 1.0);
    for (int j = 0; j < m; ++j) {
      proj[j] = 0.0;
      for (int c = 0; c < n; ++c) proj[j] += dir[c] * points[j][c];
    }
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return proj[a] < proj[b]; });
    separated = true;
    for (int j = 0; j + 1 < m; ++j) {
      const double gap = proj[order[j + 1]] - proj[order[j]];
      if (!(gap > 1e-9 * (1.0 + std::fabs(proj[order[j]])))) {
        separated = false;
        break;
      }
    }
  }
  if (!separated) {
    throw NumericError(
        "construct_interpolant: no separating direction in 64 draws (duplicate points?)");
  }

  // Ridge shifts: the first sits below every projection, each later one
  // between its point and the previous one (closer to its own), so for large
  // alpha the collocation matrix tends to +/-1 in a triangular pattern.
  std::vector<double> tau(m);
  for (int j = 0; j < m; ++j) tau[j] = proj[order[j]];
  std::vector<double> shifts(m);
  shifts[0] = tau[0] - 1.0;
  for (int k = 1; k < m; ++k) shifts[k] = (3.0 * tau[k] + tau[k - 1]) / 4.0;

  Interpolant out;
  out.dir = dir;
  out.shifts = shifts;
  out.out_w.resize(values.size());

  std::vector<double> a(static_cast<size_t>(m) * m);
  std::vector<double> a_resc(static_cast<size_t>(m) * m);
  std::vector<double> inv;
  for (double alpha = 1.0;; alpha *= 2.0) {
    if (alpha > std::ldexp(1.0, 40)) {
      throw NumericError(
          "construct_interpolant: steepness cap 2^40 reached without convergence");
    }
    for (int j = 0; j < m; ++j) {
      for (int k = 0; k < m; ++k) {
        const double t = std::tanh(alpha * (tau[j] - shifts[k]));
        a[static_cast<size_t>(j) * m + k] = t;
        a_resc[static_cast<size_t>(j) * m + k] = 0.5 * (t + 1.0);
      }
    }
    // Conditioning is measured on the rescaled matrix (entries in [0, 1],
    // limiting shape lower-triangular of ones); the raw +/-1 matrix differs
    // from it by a rank-one shift that inflates norms without meaning.
    if (!invert_dense(a_resc, m, inv)) continue;
    const double cond = norm_inf(a_resc, m) * norm_inf(inv, m);
    if (!(cond < 1e12)) continue;
    if (!invert_dense(a, m, inv)) continue;

    bool all_ok = true;
    for (size_t c = 0; c < values.size() && all_ok; ++c) {
      std::vector<double>& wout = out.out_w[c];
      wout.assign(m, 0.0);
      // Matrix row j collocates at the sorted projection tau[j], i.e. at
      // point order[j]; the right-hand side must be permuted to match.
      for (int k = 0; k < m; ++k) {
        double acc = 0.0;
        for (int j = 0; j < m; ++j) {
          acc += inv[static_cast<size_t>(k) * m + j] * values[c][order[j]];
        }
        wout[k] = acc;
      }
      for (int j = 0; j < m && all_ok; ++j) {
        double fit = 0.0;
        for (int k = 0; k < m; ++k) fit += a[static_cast<size_t>(j) * m + k] * wout[k];
        if (!(std::fabs(fit - values[c][order[j]]) < 1e-8)) all_ok = false;
      }
    }
    if (all_ok) {
      out.alpha = alpha;
      return out;
    }
  }
}

double interp_eval(const Interpolant& interp, const std::vector<double>& x, size_t c) {
  if (c >= interp.out_w.size()) throw ConfigError("interp_eval: component out of range");
  if (x.size() != interp.dir.size()) throw ConfigError("interp_eval: dimension mismatch");
  double proj = 0.0;
  for (size_t j = 0; j < x.size(); ++j) proj += interp.dir[j] * x[j];
  double acc = 0.0;
  for (size_t k = 0; k < interp.shifts.size(); ++k) {
    acc += interp.out_w[c][k] * std::tanh(interp.alpha * (proj - interp.shifts[k]));
  }
  return acc;
}

ScoreNet oracle_net(const ScoreTable& table, double query_time, double clip_bound,
                    uint64_t seed) {
  const StateSpace sp = table.space;
  const int64_t n = sp.table_size();
  const int m = table.per_state();

  // Interpolation runs on the network's own input encoding so the solved
  // ridge functions transplant directly into layer-0 weights.
  ScoreNet net = net_init(sp.S, sp.d, static_cast<int>(n), 2, clip_bound,
                          query_time, seed);
  std::vector<std::vector<double>> points(n, std::vector<double>(net.in_dim()));
  for (int64_t idx = 0; idx < n; ++idx) {
    const StateVector x = state_of(sp, idx);
    encode_input(net, x, points[idx].data());
  }
  std::vector<std::vector<double>> logvals(m, std::vector<double>(n));
  for (int64_t idx = 0; idx < n; ++idx) {
    const double* row = table.row(idx);
    for (int c = 0; c < m; ++c) {
      if (!(row[c] >= 1e-300)) {
        throw NumericError("oracle_net: table entry too small to take log");
      }
      logvals[c][idx] = std::log(row[c]);
    }
  }
  const Interpolant interp = construct_interpolant(points, logvals, seed);

  // Layer 0, row k: alpha * u with bias -alpha * shift_k. Layer 1, row c:
  // the component's solved output weights with zero bias; exp then undoes
  // the log, so raw outputs equal the table entries exactly.
  for (int64_t k = 0; k < n; ++k) {
    for (int j = 0; j < net.in_dim(); ++j) {
      net.w[0][static_cast<size_t>(k) * net.in_dim() + j] = interp.alpha * interp.dir[j];
    }
    net.b[0][k] = -interp.alpha * interp.shifts[k];
  }
  for (int c = 0; c < m; ++c) {
    for (int64_t k = 0; k < n; ++k) {
      net.w[1][static_cast<size_t>(c) * n + k] = interp.out_w[c][k];
    }
    net.b[1][c] = 0.0;
  }
  return net;
}

}  // namespace discore
