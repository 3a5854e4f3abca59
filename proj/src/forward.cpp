#include "discore/forward.hpp"

#include <cmath>
#include <string>

namespace discore {

TokenKernel token_kernel(int S, double t) {
  if (S < 2) throw ConfigError("token_kernel: S must be >= 2");
  if (!(t >= 0.0)) throw ConfigError("token_kernel: time must be >= 0");
  TokenKernel k;
  k.S = S;
  k.t = t;
  const double decay = std::exp(-t);
  const double off = (1.0 - decay) / S;
  k.p.assign(static_cast<size_t>(S) * S, off);
  for (int i = 0; i < S; ++i) k.p[static_cast<size_t>(i) * S + i] += decay;
  return k;
}

std::vector<double> token_rate(int S) {
  if (S < 2) throw ConfigError("token_rate: S must be >= 2");
  std::vector<double> q(static_cast<size_t>(S) * S, 1.0 / S);
  for (int i = 0; i < S; ++i) q[static_cast<size_t>(i) * S + i] -= 1.0;
  return q;
}

double uniform_rate_bound(int S, int d) {
  if (S < 2 || d < 1) throw ConfigError("uniform_rate_bound: need S >= 2, d >= 1");
  return static_cast<double>(d) * (S - 1) / S;
}

DistTable stationary(StateSpace sp) { return DistTable::uniform(sp); }

DistTable forward_marginal(const DistTable& p0, double t) {
  p0.validate();
  const int S = p0.space.S;
  const int d = p0.space.d;
  const int64_t n = p0.space.table_size();
  const TokenKernel kernel = token_kernel(S, t);

  DistTable q = p0;
  std::vector<double> slot(S);
  // Contract coordinate i: new[a] = sum_b old[b] * P[b, a], applied in place
  // over every slice where coordinate i varies and the others are fixed.
  int64_t stride = n / S;  // coordinate 0 is most significant
  for (int i = 0; i < d; ++i) {
    const int64_t block = stride * S;
    for (int64_t outer = 0; outer < n; outer += block) {
      for (int64_t inner = 0; inner < stride; ++inner) {
        const int64_t base = outer + inner;
        for (int a = 0; a < S; ++a) {
          double acc = 0.0;
          for (int b = 0; b < S; ++b) {
            acc += q.p[base + b * stride] * kernel.p[static_cast<size_t>(b) * S + a];
          }
          slot[a] = acc;
        }
        for (int a = 0; a < S; ++a) q.p[base + a * stride] = slot[a];
      }
    }
    stride /= S;
  }
  // d-fold kernel products accumulate rounding; renormalize before handing
  // the table to probability comparisons pinned at 1e-12.
  q.renormalize();
  return q;
}

StateVector sample_forward(const StateVector& x0, const TokenKernel& kernel, Rng& rng) {
  StateVector xt(x0.size());
  for (size_t j = 0; j < x0.size(); ++j) {
    if (x0[j] < 0 || x0[j] >= kernel.S) {
      throw ConfigError("sample_forward: symbol out of range at coordinate " + std::to_string(j));
    }
    xt[j] = rng.categorical(kernel.row(x0[j]), kernel.S);
  }
  return xt;
}

}  // namespace discore
