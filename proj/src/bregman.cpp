#include "discore/bregman.hpp"

#include <cmath>
#include <string>

#include "discore/score.hpp"

namespace discore {

namespace {

void require_positive(std::span<const double> x, const char* who) {
  for (double v : x) {
    if (!(v >= kPositivityFloor) || !std::isfinite(v)) {
      throw NumericError(std::string(who) + ": argument below positivity floor (got " +
                         std::to_string(v) + ")");
    }
  }
}

}  // namespace

double neg_entropy(std::span<const double> x) {
  require_positive(x, "neg_entropy");
  double acc = 0.0;
  for (double v : x) acc += v * std::log(v);
  return acc;
}

double bregman_div(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ConfigError("bregman_div: length mismatch");
  require_positive(x, "bregman_div");
  require_positive(y, "bregman_div");
  double acc = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    acc += -x[i] + y[i] + x[i] * std::log(x[i] / y[i]);
  }
  return acc;
}

double se_sample_loss(int S, std::span<const double> raw, std::span<const double> targets) {
  if (raw.size() != targets.size()) throw ConfigError("se_sample_loss: shape mismatch");
  require_positive(raw, "se_sample_loss");
  require_positive(targets, "se_sample_loss");
  double acc = 0.0;
  for (size_t i = 0; i < raw.size(); ++i) {
    acc += -targets[i] * std::log(raw[i]) + raw[i];
  }
  return acc / S;
}

double se_minibatch_loss(int S, const std::vector<std::vector<double>>& raw,
                         const std::vector<std::vector<double>>& targets) {
  if (raw.size() != targets.size() || raw.empty()) {
    throw ConfigError("se_minibatch_loss: batch shape mismatch or empty batch");
  }
  double acc = 0.0;
  for (size_t i = 0; i < raw.size(); ++i) acc += se_sample_loss(S, raw[i], targets[i]);
  return acc / static_cast<double>(raw.size());
}

double se_loss_constant(int S, std::span<const double> targets) {
  require_positive(targets, "se_loss_constant");
  double acc = 0.0;
  for (double r : targets) acc += r - r * std::log(r);
  return acc / S;
}

double simpson_adaptive(const std::function<double(double)>& f, double a, double b,
                        double tol, int m0, int m_cap) {
  if (!(b > a)) throw ConfigError("simpson_adaptive: empty interval");
  auto composite = [&](int m) {
    const double step = (b - a) / m;
    double acc = f(a) + f(b);
    for (int i = 1; i < m; ++i) acc += f(a + i * step) * (i % 2 ? 4.0 : 2.0);
    return acc * step / 3.0;
  };
  double prev = composite(m0);
  for (int m = 2 * m0; m <= m_cap; m *= 2) {
    const double cur = composite(m);
    if (std::fabs(cur - prev) < tol) return cur;
    prev = cur;
  }
  throw NumericError("simpson_adaptive: quadrature did not converge within node cap");
}

double population_se(const DistTable& p0, const ScoreFn& net_at, int k, double h,
                     double delta, double tol) {
  if (k < 0 || !(h > 0.0) || delta < 0.0) {
    throw ConfigError("population_se: need k >= 0, h > 0, delta >= 0");
  }
  const int64_t n = p0.space.table_size();
  const double t_lo = k * h + delta;
  const double t_hi = (k + 1) * h + delta;

  // Truth frozen at the interval's upper limit, matching the frozen network
  // query time; only the expectation measure q_t varies under the integral.
  const ScoreTable s_frozen = true_score(p0, t_hi);
  std::vector<std::vector<double>> net_rows(n);
  std::vector<double> div(n);
  for (int64_t x = 0; x < n; ++x) {
    net_rows[x] = net_at(x);
    div[x] = bregman_div(
        std::span<const double>(s_frozen.row(x), s_frozen.per_state()), net_rows[x]);
  }

  auto integrand = [&](double t) {
    const DistTable q = forward_marginal(p0, t);
    double acc = 0.0;
    for (int64_t x = 0; x < n; ++x) acc += q.p[x] * div[x];
    return acc;
  };
  return simpson_adaptive(integrand, t_lo, t_hi, tol);
}

}  // namespace discore
