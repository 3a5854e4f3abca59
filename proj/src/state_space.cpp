#include "discore/state_space.hpp"

#include <cmath>
#include <string>

namespace discore {

StateSpace::StateSpace(int S_, int d_) : S(S_), d(d_) {
  if (S < 2) throw ConfigError("state space needs S >= 2, got S=" + std::to_string(S));
  if (d < 1) throw ConfigError("state space needs d >= 1, got d=" + std::to_string(d));
}

int64_t StateSpace::table_size() const {
  int64_t n = 1;
  for (int i = 0; i < d; ++i) {
    n *= S;
    if (n > kEnumerationCap) {
      throw CapError("S^d = " + std::to_string(S) + "^" + std::to_string(d) +
                     " exceeds the dense-enumeration cap 2^20");
    }
  }
  return n;
}

bool StateSpace::within_cap() const {
  int64_t n = 1;
  for (int i = 0; i < d; ++i) {
    n *= S;
    if (n > kEnumerationCap) return false;
  }
  return true;
}

int64_t index_of(const StateSpace& sp, const StateVector& x) {
  if (static_cast<int>(x.size()) != sp.d) {
    throw ConfigError("state has " + std::to_string(x.size()) + " coordinates, expected " +
                      std::to_string(sp.d));
  }
  int64_t idx = 0;
  for (int i = 0; i < sp.d; ++i) {
    if (x[i] < 0 || x[i] >= sp.S) {
      throw ConfigError("symbol " + std::to_string(x[i]) + " out of range [0," +
                        std::to_string(sp.S - 1) + "] at coordinate " + std::to_string(i));
    }
    idx = idx * sp.S + x[i];
  }
  return idx;
}

StateVector state_of(const StateSpace& sp, int64_t index) {
  if (index < 0 || index >= sp.table_size()) {
    throw ConfigError("state index " + std::to_string(index) + " out of range");
  }
  StateVector x(sp.d);
  for (int i = sp.d - 1; i >= 0; --i) {
    x[i] = static_cast<int>(index % sp.S);
    index /= sp.S;
  }
  return x;
}

int hamming(const StateVector& x, const StateVector& y) {
  if (x.size() != y.size()) throw ConfigError("hamming: states differ in length");
  int c = 0;
  for (size_t i = 0; i < x.size(); ++i) c += (x[i] != y[i]);
  return c;
}

DistTable::DistTable(StateSpace sp, std::vector<double> probs)
    : space(sp), p(std::move(probs)) {
  if (static_cast<int64_t>(p.size()) != space.table_size()) {
    throw ConfigError("distribution table has " + std::to_string(p.size()) +
                      " entries, expected " + std::to_string(space.table_size()));
  }
}

DistTable DistTable::uniform(StateSpace sp) {
  const int64_t n = sp.table_size();
  return DistTable(sp, std::vector<double>(n, 1.0 / static_cast<double>(n)));
}

DistTable DistTable::delta(StateSpace sp, const StateVector& x) {
  std::vector<double> probs(sp.table_size(), 0.0);
  probs[index_of(sp, x)] = 1.0;
  return DistTable(sp, std::move(probs));
}

void DistTable::renormalize() {
  double sum = 0.0;
  for (double v : p) sum += v;
  if (!(sum > 0.0) || !std::isfinite(sum)) {
    throw NumericError("distribution table has nonpositive or nonfinite mass");
  }
  for (double& v : p) v /= sum;
}

void DistTable::validate(double tol) const {
  double sum = 0.0;
  for (double v : p) {
    if (v < 0.0 || !std::isfinite(v)) {
      throw NumericError("distribution table has a negative or nonfinite entry");
    }
    sum += v;
  }
  if (std::fabs(sum - 1.0) > tol) {
    throw NumericError("distribution table sums to " + std::to_string(sum) +
                       ", outside tolerance of 1");
  }
}

double tv_distance(const DistTable& a, const DistTable& b) {
  if (!(a.space == b.space)) throw ConfigError("tv_distance: mismatched state spaces");
  double s = 0.0;
  for (size_t i = 0; i < a.p.size(); ++i) s += std::fabs(a.p[i] - b.p[i]);
  return 0.5 * s;
}

}  // namespace discore
