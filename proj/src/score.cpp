#include "discore/score.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>

namespace discore {

ScoreTable::ScoreTable(StateSpace sp) : space(sp) {
  v.assign(static_cast<size_t>(space.table_size()) * per_state(), 0.0);
}

double ScoreTable::aggregate(int64_t state) const {
  const double* r = row(state);
  double sum = 0.0;
  for (int j = 0; j < per_state(); ++j) sum += r[j];
  return sum;
}

ScoreTable score_from_marginal(const DistTable& q) {
  const int S = q.space.S;
  const int d = q.space.d;
  const int64_t n = q.space.table_size();
  for (int64_t x = 0; x < n; ++x) {
    if (!(q.p[x] > 0.0)) {
      throw NumericError("score undefined: marginal has zero mass at state index " +
                         std::to_string(x));
    }
  }
  ScoreTable s(q.space);
  // Neighbor of x with coordinate i set to symbol a differs in index by
  // (a - x_i) * S^{d-1-i}.
  std::vector<int64_t> stride(d);
  stride[d - 1] = 1;
  for (int i = d - 2; i >= 0; --i) stride[i] = stride[i + 1] * S;

  StateVector x(d, 0);
  for (int64_t idx = 0; idx < n; ++idx) {
    const double qx = q.p[idx];
    for (int i = 0; i < d; ++i) {
      for (int slot = 0; slot < S - 1; ++slot) {
        const int a = ScoreTable::symbol_of(slot, x[i]);
        const int64_t nbr = idx + (a - x[i]) * stride[i];
        s.at(idx, i, slot) = q.p[nbr] / qx;
      }
    }
    // advance mixed-radix counter (coordinate 0 most significant)
    for (int i = d - 1; i >= 0; --i) {
      if (++x[i] < S) break;
      x[i] = 0;
    }
  }
  return s;
}

ScoreTable true_score(const DistTable& p0, double t) {
  return score_from_marginal(forward_marginal(p0, t));
}

std::vector<double> ratio_targets(const StateVector& x0, const StateVector& xt,
                                  const TokenKernel& kernel) {
  if (x0.size() != xt.size()) throw ConfigError("ratio_targets: state shapes differ");
  if (!(kernel.t > 0.0)) {
    throw ConfigError("ratio_targets: requires t > 0 (kernel row can have zero mass at t = 0)");
  }
  const int S = kernel.S;
  const int d = static_cast<int>(x0.size());
  std::vector<double> r(static_cast<size_t>(d) * (S - 1));
  size_t out = 0;
  for (int j = 0; j < d; ++j) {
    const double* row = kernel.row(x0[j]);
    const double denom = row[xt[j]];
    for (int slot = 0; slot < S - 1; ++slot) {
      const int a = ScoreTable::symbol_of(slot, xt[j]);
      r[out++] = row[a] / denom;
    }
  }
  return r;
}

ScoreBoundReport score_bound(const DistTable& p0) {
  p0.validate();
  const int S = p0.space.S;
  const int d = p0.space.d;
  const int64_t n = p0.space.table_size();
  for (int64_t x = 0; x < n; ++x) {
    if (!(p0.p[x] > 0.0)) {
      throw ConfigError("score_bound: p0 must have full support (zero at state index " +
                        std::to_string(x) + "); smooth the empirical table first");
    }
  }

  ScoreBoundReport rep;
  // B is the largest single-coordinate replacement ratio of p0, i.e. the
  // largest entry of the time-zero score table.
  const ScoreTable s0 = score_from_marginal(p0);
  rep.B = 1.0;
  for (double val : s0.v) rep.B = std::max(rep.B, val);

  rep.kappa.assign(d, 1.0);
  rep.kappa_sq = 0.0;
  std::vector<double> marg(S);
  int64_t stride = n / S;
  for (int i = 0; i < d; ++i) {
    std::fill(marg.begin(), marg.end(), 0.0);
    const int64_t block = stride * S;
    for (int64_t outer = 0; outer < n; outer += block) {
      for (int64_t inner = 0; inner < stride; ++inner) {
        for (int a = 0; a < S; ++a) marg[a] += p0.p[outer + inner + a * stride];
      }
    }
    double lo = marg[0], hi = marg[0];
    for (int a = 1; a < S; ++a) {
      lo = std::min(lo, marg[a]);
      hi = std::max(hi, marg[a]);
    }
    rep.kappa[i] = hi / lo;
    rep.kappa_sq += rep.kappa[i] * rep.kappa[i];
    stride /= S;
  }
  rep.C = 1.5 * rep.B;
  return rep;
}

BoundCheck check_score_bound(const ScoreTable& s, double B, double slack) {
  const double lo = 1.0 / B - slack;
  const double hi = B + slack;
  BoundCheck chk;
  const int64_t n = s.space.table_size();
  StateVector x(s.space.d, 0);
  for (int64_t idx = 0; idx < n; ++idx) {
    for (int i = 0; i < s.space.d; ++i) {
      for (int slot = 0; slot < s.alts(); ++slot) {
        const double val = s.at(idx, i, slot);
        const double excess = std::max(lo - val, val - hi);
        if (excess > chk.worst_excess) {
          chk.pass = false;
          chk.worst_excess = excess;
          chk.worst_entry = val;
          chk.state = idx;
          chk.coord = i;
          chk.symbol = ScoreTable::symbol_of(slot, x[i]);
        }
      }
    }
    for (int i = s.space.d - 1; i >= 0; --i) {
      if (++x[i] < s.space.S) break;
      x[i] = 0;
    }
  }
  return chk;
}

std::vector<double> reverse_generator(const ScoreTable& s) {
  const int S = s.space.S;
  const int d = s.space.d;
  const int64_t n = s.space.table_size();
  std::vector<double> q(static_cast<size_t>(n) * n, 0.0);

  std::vector<int64_t> stride(d);
  stride[d - 1] = 1;
  for (int i = d - 2; i >= 0; --i) stride[i] = stride[i + 1] * S;

  StateVector x(d, 0);
  for (int64_t idx = 0; idx < n; ++idx) {
    double exit = 0.0;
    for (int i = 0; i < d; ++i) {
      for (int slot = 0; slot < S - 1; ++slot) {
        const int a = ScoreTable::symbol_of(slot, x[i]);
        const int64_t nbr = idx + (a - x[i]) * stride[i];
        const double rate = s.at(idx, i, slot) / S;
        q[static_cast<size_t>(idx) * n + nbr] = rate;
        exit += rate;
      }
    }
    q[static_cast<size_t>(idx) * n + idx] = -exit;
    for (int i = d - 1; i >= 0; --i) {
      if (++x[i] < S) break;
      x[i] = 0;
    }
  }
  return q;
}

DistTable smoothed_empirical(StateSpace sp, const std::vector<StateVector>& rows, double alpha) {
  if (rows.empty()) throw ConfigError("smoothed_empirical: empty sample list");
  if (!(alpha > 0.0)) throw ConfigError("smoothed_empirical: alpha must be > 0");
  const int64_t n = sp.table_size();
  const double floor = alpha / static_cast<double>(n);
  std::vector<double> counts(n, floor);
  for (const StateVector& x : rows) counts[index_of(sp, x)] += 1.0;
  DistTable table(sp, std::move(counts));
  table.renormalize();
  return table;
}

void write_score_csv(const ScoreTable& s, std::ostream& out) {
  out << "state,coord,symbol,value\n";
  char buf[64];
  const int64_t n = s.space.table_size();
  StateVector x(s.space.d, 0);
  for (int64_t idx = 0; idx < n; ++idx) {
    for (int i = 0; i < s.space.d; ++i) {
      for (int slot = 0; slot < s.alts(); ++slot) {
        std::snprintf(buf, sizeof buf, "%.17g", s.at(idx, i, slot));
        out << idx << ',' << i << ',' << ScoreTable::symbol_of(slot, x[i]) << ',' << buf << '\n';
      }
    }
    for (int i = s.space.d - 1; i >= 0; --i) {
      if (++x[i] < s.space.S) break;
      x[i] = 0;
    }
  }
}

}  // namespace discore
