#include <cmath>
#include <sstream>
#include <vector>

#include "doctest.h"

#include "discore/forward.hpp"
#include "discore/rng.hpp"
#include "discore/score.hpp"
#include "discore/state_space.hpp"

using namespace discore;

namespace {

DistTable random_full_support(StateSpace sp, uint64_t seed, double lo = 0.1,
                              double hi = 1.0) {
  Rng rng(seed);
  std::vector<double> raw(sp.table_size());
  for (double& v : raw) v = rng.uniform(lo, hi);
  DistTable t(sp, std::move(raw));
  t.renormalize();
  return t;
}

}  // namespace

TEST_CASE("slot and symbol maps skip the current symbol and invert") {
  // Current symbol 1 in S=4: alternatives 0, 2, 3 occupy slots 0, 1, 2.
  CHECK(ScoreTable::slot_of(0, 1) == 0);
  CHECK(ScoreTable::slot_of(2, 1) == 1);
  CHECK(ScoreTable::slot_of(3, 1) == 2);
  CHECK(ScoreTable::symbol_of(0, 1) == 0);
  CHECK(ScoreTable::symbol_of(1, 1) == 2);
  CHECK(ScoreTable::symbol_of(2, 1) == 3);
  for (int xi = 0; xi < 4; ++xi) {
    for (int a = 0; a < 4; ++a) {
      if (a == xi) continue;
      CHECK(ScoreTable::symbol_of(ScoreTable::slot_of(a, xi), xi) == a);
    }
  }
}

TEST_CASE("true score equals marginal ratios computed independently") {
  const StateSpace sp(3, 2);
  const DistTable p0 = random_full_support(sp, 200);
  const double t = 0.8;
  const ScoreTable s = true_score(p0, t);

  // Independent path: dense tensor-product transport, then explicit ratios.
  const TokenKernel kernel = token_kernel(sp.S, t);
  std::vector<double> q(sp.table_size(), 0.0);
  for (int64_t from = 0; from < sp.table_size(); ++from) {
    const StateVector xf = state_of(sp, from);
    for (int64_t to = 0; to < sp.table_size(); ++to) {
      const StateVector xt = state_of(sp, to);
      double prob = 1.0;
      for (int i = 0; i < sp.d; ++i) prob *= kernel.row(xf[i])[xt[i]];
      q[to] += p0.p[from] * prob;
    }
  }
  for (int64_t x = 0; x < sp.table_size(); ++x) {
    const StateVector xv = state_of(sp, x);
    for (int i = 0; i < sp.d; ++i) {
      for (int slot = 0; slot < sp.S - 1; ++slot) {
        StateVector yv = xv;
        yv[i] = ScoreTable::symbol_of(slot, xv[i]);
        const double expect = q[index_of(sp, yv)] / q[x];
        CHECK(std::fabs(s.at(x, i, slot) - expect) < 1e-12);
      }
    }
  }
}

TEST_CASE("score reciprocity and aggregate") {
  const StateSpace sp(2, 3);
  const DistTable p0 = random_full_support(sp, 201);
  const ScoreTable s = true_score(p0, 0.6);
  for (int64_t x = 0; x < sp.table_size(); ++x) {
    const StateVector xv = state_of(sp, x);
    double agg = 0.0;
    for (int i = 0; i < sp.d; ++i) {
      for (int slot = 0; slot < sp.S - 1; ++slot) {
        const int a = ScoreTable::symbol_of(slot, xv[i]);
        StateVector yv = xv;
        yv[i] = a;
        const double back = s.at(index_of(sp, yv), i, ScoreTable::slot_of(xv[i], a));
        CHECK(std::fabs(s.at(x, i, slot) * back - 1.0) < 1e-9);
        agg += s.at(x, i, slot);
      }
    }
    CHECK(s.aggregate(x) == doctest::Approx(agg).epsilon(1e-14));
  }
}

TEST_CASE("ratio targets are conditionally unbiased for the true score") {
  // E[r(xt) | xt] over x0 ~ p0 given the corruption x0 -> xt IS the score at
  // xt; verified by full enumeration of the joint law.
  const StateSpace sp(3, 1);
  const DistTable p0 = random_full_support(sp, 202);
  const double t = 0.45;
  const TokenKernel kernel = token_kernel(sp.S, t);
  const ScoreTable s = true_score(p0, t);

  for (int64_t xt = 0; xt < sp.table_size(); ++xt) {
    const StateVector xtv = state_of(sp, xt);
    std::vector<double> mean(s.per_state(), 0.0);
    double mass = 0.0;
    for (int64_t x0 = 0; x0 < sp.table_size(); ++x0) {
      const StateVector x0v = state_of(sp, x0);
      double prob = p0.p[x0];
      for (int i = 0; i < sp.d; ++i) prob *= kernel.row(x0v[i])[xtv[i]];
      const std::vector<double> r = ratio_targets(x0v, xtv, kernel);
      for (size_t j = 0; j < r.size(); ++j) mean[j] += prob * r[j];
      mass += prob;
    }
    for (int j = 0; j < s.per_state(); ++j) {
      CHECK(std::fabs(mean[j] / mass - s.row(xt)[j]) < 1e-12);
    }
  }
}

TEST_CASE("ratio targets reject the degenerate t = 0 kernel") {
  const TokenKernel k0 = token_kernel(2, 0.0);
  CHECK_THROWS_AS(ratio_targets({0}, {1}, k0), Error);
}

TEST_CASE("score bound: B policy and audit") {
  const StateSpace sp(2, 1);
  const ScoreBoundReport uniform_bound = score_bound(DistTable::uniform(sp));
  CHECK(uniform_bound.B == doctest::Approx(1.0));
  CHECK(uniform_bound.C == doctest::Approx(1.5));

  const ScoreBoundReport skewed = score_bound(DistTable(sp, {0.8, 0.2}));
  CHECK(skewed.B == doctest::Approx(4.0));
  CHECK(skewed.C == doctest::Approx(6.0));
  CHECK(skewed.kappa.size() == 1);
  CHECK(skewed.kappa[0] == doctest::Approx(4.0));
  CHECK(skewed.kappa_sq == doctest::Approx(16.0));

  const DistTable p0(sp, {0.8, 0.2});
  for (double t : {0.01, 0.1, 1.0, 10.0}) {
    const BoundCheck chk = check_score_bound(true_score(p0, t), skewed.B);
    CHECK(chk.pass);
  }
  // A bound below the true range must be flagged and locate a violator.
  const BoundCheck tight = check_score_bound(true_score(p0, 0.01), 2.0);
  CHECK_FALSE(tight.pass);
  CHECK(tight.worst_excess > 0.0);
  CHECK(tight.state >= 0);
}

TEST_CASE("scores at long horizon flatten to one") {
  const DistTable p0 = random_full_support(StateSpace(3, 2), 203);
  const ScoreTable s = true_score(p0, 40.0);
  for (double v : s.v) CHECK(std::fabs(v - 1.0) < 1e-9);
}

TEST_CASE("reverse generator: structure and flow balance") {
  const StateSpace sp(3, 2);
  const DistTable p0 = random_full_support(sp, 204);
  const double t = 0.9;
  const DistTable q = forward_marginal(p0, t);
  const ScoreTable s = true_score(p0, t);
  const std::vector<double> gen = reverse_generator(s);
  const int64_t n = sp.table_size();

  for (int64_t x = 0; x < n; ++x) {
    double row_sum = 0.0;
    const StateVector xv = state_of(sp, x);
    for (int64_t y = 0; y < n; ++y) {
      const double g = gen[static_cast<size_t>(x) * n + y];
      row_sum += g;
      const int dist = hamming(xv, state_of(sp, y));
      if (dist == 0) {
        CHECK(g <= 0.0);
      } else if (dist == 1) {
        const StateVector yv = state_of(sp, y);
        int coord = 0;
        for (int i = 0; i < sp.d; ++i) {
          if (xv[i] != yv[i]) coord = i;
        }
        const double expect = s.at(x, coord, ScoreTable::slot_of(yv[coord], xv[coord])) / sp.S;
        CHECK(std::fabs(g - expect) < 1e-14);
        // Detailed balance of the reversal: q(x) rate(x->y) = q(y) * (1/S).
        CHECK(std::fabs(q.p[x] * g - q.p[y] / sp.S) < 1e-10);
      } else {
        CHECK(g == 0.0);
      }
    }
    CHECK(std::fabs(row_sum) < 1e-12);
  }
}

TEST_CASE("score_from_marginal matches true_score through the forward law") {
  const DistTable p0 = random_full_support(StateSpace(2, 2), 205);
  const double t = 0.35;
  const ScoreTable a = true_score(p0, t);
  const ScoreTable b = score_from_marginal(forward_marginal(p0, t));
  REQUIRE(a.v.size() == b.v.size());
  for (size_t i = 0; i < a.v.size(); ++i) CHECK(a.v[i] == doctest::Approx(b.v[i]).epsilon(1e-14));
}

TEST_CASE("smoothed empirical law has full support and correct weights") {
  const StateSpace sp(2, 2);
  const std::vector<StateVector> rows = {{0, 0}, {0, 0}, {1, 1}};
  const DistTable emp = smoothed_empirical(sp, rows, 1.0);
  emp.validate(1e-12);
  // alpha = 1 spreads one pseudo-count over 4 states: (2 + 1/4) / 4, etc.
  CHECK(emp.p[index_of(sp, {0, 0})] == doctest::Approx((2.0 + 0.25) / 4.0));
  CHECK(emp.p[index_of(sp, {0, 1})] == doctest::Approx(0.25 / 4.0));
  CHECK(emp.p[index_of(sp, {1, 1})] == doctest::Approx((1.0 + 0.25) / 4.0));
  for (double v : emp.p) CHECK(v > 0.0);
}

TEST_CASE("score table dump has one line per entry plus header") {
  const DistTable p0 = random_full_support(StateSpace(2, 2), 206);
  const ScoreTable s = true_score(p0, 0.5);
  std::ostringstream out;
  write_score_csv(s, out);
  long lines = 0;
  for (char c : out.str()) lines += c == '\n';
  CHECK(lines == 1 + s.space.table_size() * s.per_state());
}
