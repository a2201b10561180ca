#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>
#include <set>

#include "cfx/error.hpp"
#include "cfx/warp.hpp"
#include "support.hpp"

using namespace cfx;
using namespace cfx::warp;

namespace {

TimeSeries series(std::vector<double> values) {
  const std::size_t n = values.size();
  return TimeSeries(n, 1, std::move(values));
}

// Independent path enumeration: recursive walk over the three moves.
void enumerate(std::size_t i, std::size_t j, std::size_t m, std::size_t n, AlignmentPath& prefix,
               std::vector<AlignmentPath>& out) {
  prefix.emplace_back(i, j);
  if (i == m - 1 && j == n - 1) {
    out.push_back(prefix);
  } else {
    if (i + 1 < m && j + 1 < n) enumerate(i + 1, j + 1, m, n, prefix, out);
    if (i + 1 < m) enumerate(i + 1, j, m, n, prefix, out);
    if (j + 1 < n) enumerate(i, j + 1, m, n, prefix, out);
  }
  prefix.pop_back();
}

std::vector<AlignmentPath> oracle_paths(std::size_t m, std::size_t n) {
  std::vector<AlignmentPath> out;
  AlignmentPath prefix;
  enumerate(0, 0, m, n, prefix, out);
  return out;
}

double oracle_cost(const TimeSeries& x, const TimeSeries& y, const AlignmentPath& path) {
  // Step costs summed along the path in order, so the minimum can be compared exactly.
  double total = 0;
  for (auto [i, j] : path) {
    double step = 0;
    for (std::size_t ch = 0; ch < x.channels(); ++ch) step += (x(i, ch) - y(j, ch)) * (x(i, ch) - y(j, ch));
    total += step;
  }
  return total;
}

// Plain log-sum-exp with long double, as a second opinion on the shifted version.
double oracle_soft_min(const std::vector<double>& values, double gamma) {
  const double lo = *std::min_element(values.begin(), values.end());
  long double s = 0;
  for (double v : values) s += std::exp(static_cast<long double>(-(v - lo) / gamma));
  return lo - gamma * static_cast<double>(std::log(s));
}

bool valid_path(const AlignmentPath& p, std::size_t m, std::size_t n) {
  if (p.empty() || p.front() != std::pair<std::size_t, std::size_t>{0, 0}) return false;
  if (p.back() != std::pair<std::size_t, std::size_t>{m - 1, n - 1}) return false;
  for (std::size_t k = 1; k < p.size(); ++k) {
    const auto di = p[k].first - p[k - 1].first, dj = p[k].second - p[k - 1].second;
    if (di > 1 || dj > 1 || di + dj == 0) return false;
  }
  return true;
}

}  // namespace

TEST(CostMatrix, SinglePair) {
  const auto c = cost_matrix(series({0}), series({3}));
  EXPECT_EQ(c.rows, 1u);
  EXPECT_EQ(c(0, 0), 9.0);
}

TEST(CostMatrix, IdentityHasZeroDiagonal) {
  std::mt19937_64 rng(1);
  const auto x = test::random_series(rng, 5, 2);
  const auto c = cost_matrix(x, x);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(c(i, i), 0.0);
}

TEST(CostMatrix, MatchesRecomputation) {
  std::mt19937_64 rng(2);
  const auto x = test::random_series(rng, 4, 3), y = test::random_series(rng, 5, 3);
  const auto c = cost_matrix(x, y);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 5; ++j) EXPECT_DOUBLE_EQ(c(i, j), oracle_cost(x, y, {{i, j}}));
  }
  EXPECT_THROW(cost_matrix(x, test::random_series(rng, 5, 2)), PreconditionError);
}

TEST(Dtw, SelfDistanceIsZeroOnTheDiagonal) {
  std::mt19937_64 rng(3);
  const auto x = test::random_series(rng, 6, 1);
  const auto r = dtw(x, x);
  EXPECT_EQ(r.distance, 0.0);
  ASSERT_EQ(r.path.size(), 6u);
  for (std::size_t k = 0; k < 6; ++k) EXPECT_EQ(r.path[k], (std::pair<std::size_t, std::size_t>{k, k}));
}

TEST(Dtw, WorkedExamples) {
  EXPECT_EQ(dtw(series({0, 0}), series({1})).distance, 2.0);
  EXPECT_EQ(dtw(series({1, 2, 3}), series({1, 2, 2, 3})).distance, 0.0);
  EXPECT_EQ(dtw_distance(series({1, 2, 3}), series({1, 2, 2, 3})), 0.0);
}

TEST(Dtw, TieBreakPrefersDiagonalThenVertical) {
  // All costs zero: every path ties, the traceback must take the diagonal while it can, then vertical steps.
  const auto r = dtw(series({0, 0, 0}), series({0, 0}));
  const AlignmentPath expected = {{0, 0}, {1, 0}, {2, 1}};
  EXPECT_EQ(r.path, expected);
  const auto wide = dtw(series({0, 0}), series({0, 0, 0}));
  const AlignmentPath expected_wide = {{0, 0}, {0, 1}, {1, 2}};
  EXPECT_EQ(wide.path, expected_wide);
}

TEST(Dtw, EmptySeriesCannotBeBuilt) { EXPECT_THROW(TimeSeries(0, 1), std::invalid_argument); }

TEST(BruteForcePaths, DelannoyCounts) {
  EXPECT_EQ(brute_force_paths(1, 1).size(), 1u);
  EXPECT_EQ(brute_force_paths(2, 2).size(), 3u);
  EXPECT_EQ(brute_force_paths(3, 3).size(), 13u);
  for (std::size_t m = 1; m <= 6; ++m) {
    for (std::size_t n = 1; n <= 6; ++n) {
      const auto paths = brute_force_paths(m, n);
      const auto oracle = oracle_paths(m, n);
      EXPECT_EQ(paths.size(), oracle.size());
      EXPECT_EQ(static_cast<double>(paths.size()), delannoy(m, n));
      EXPECT_EQ(std::set<AlignmentPath>(paths.begin(), paths.end()),
                std::set<AlignmentPath>(oracle.begin(), oracle.end()));
      for (const auto& p : paths) EXPECT_TRUE(valid_path(p, m, n));
    }
  }
  EXPECT_THROW(brute_force_paths(9, 2), std::invalid_argument);
}

TEST(Dtw, PathAchievesDistanceAndIsValid) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t m = 1 + rng() % 12, n = 1 + rng() % 12;
    const auto x = test::random_series(rng, m, 2), y = test::random_series(rng, n, 2);
    const auto r = dtw(x, y);
    EXPECT_TRUE(valid_path(r.path, m, n));
    EXPECT_NEAR(oracle_cost(x, y, r.path), r.distance, 1e-12);
    EXPECT_EQ(dtw_distance(x, y), r.distance);
  }
}

TEST(Dtw, SymmetryProperty) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const auto x = test::random_series(rng, 3 + trial % 5, 2), y = test::random_series(rng, 4 + trial % 3, 2);
    EXPECT_NEAR(dtw_distance(x, y), dtw_distance(y, x), 1e-12);
    EXPECT_NEAR(soft_dtw(x, y, 0.5).value, soft_dtw(y, x, 0.5).value, 1e-12);
  }
}

TEST(SoftMin, WorkedExamples) {
  const std::vector<double> single = {3.25};
  EXPECT_EQ(soft_min(single, 0.7), 3.25);
  const std::vector<double> zeros = {0, 0};
  EXPECT_NEAR(soft_min(zeros, 1.0), -std::log(2.0), 1e-15);
  const std::vector<double> gap = {1, 2};
  EXPECT_NEAR(soft_min(gap, 0.01), 1.0, 1e-6);
  EXPECT_THROW(soft_min(std::vector<double>{}, 1.0), std::invalid_argument);
  EXPECT_THROW(soft_min(gap, 0.0), std::invalid_argument);
}

TEST(SoftMin, NeverExceedsMinAndSurvivesTinyGamma) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-50, 50);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> v(1 + trial % 5);
    for (double& a : v) a = u(rng);
    for (double gamma : {1e-3, 0.1, 1.0, 10.0}) {
      const double s = soft_min(v, gamma);
      EXPECT_TRUE(std::isfinite(s));
      EXPECT_LE(s, *std::min_element(v.begin(), v.end()));
      EXPECT_NEAR(s, oracle_soft_min(v, gamma), 1e-9 * std::max(1.0, std::abs(s)));
    }
  }
}

TEST(SoftDtw, SinglePointIsTheCost) {
  for (double gamma : {0.01, 1.0, 5.0}) {
    EXPECT_DOUBLE_EQ(soft_dtw(series({1.5}), series({-0.5}), gamma).value, 4.0);
  }
}

TEST(SoftDtw, SelfValueIsNonPositive) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const auto x = test::random_series(rng, 2 + trial % 8, 1 + trial % 2);
    EXPECT_LE(soft_dtw(x, x, 1.0).value, 0.0);
  }
}

TEST(SoftDtw, EqualsSoftMinOverAllPathCosts) {
  std::mt19937_64 rng(8);
  for (std::size_t m = 1; m <= 6; ++m) {
    for (std::size_t n = 1; n <= 6; ++n) {
      const auto paths = oracle_paths(m, n);
      const auto x = test::random_series(rng, m, 2), y = test::random_series(rng, n, 2);
      std::vector<double> costs;
      for (const auto& p : paths) costs.push_back(oracle_cost(x, y, p));
      EXPECT_EQ(dtw(x, y).distance, *std::min_element(costs.begin(), costs.end()));
      for (double gamma : {0.1, 1.0}) {
        EXPECT_NEAR(soft_dtw(x, y, gamma).value, oracle_soft_min(costs, gamma), 1e-9);
      }
    }
  }
}

TEST(SoftDtw, GammaLimitBounds) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 40; ++trial) {
    const auto x = test::random_series(rng, 6, 1), y = test::random_series(rng, 6, 1);
    const double hard = dtw_distance(x, y);
    for (double gamma : {1.0, 0.1, 0.01}) {
      const double gap = hard - soft_dtw(x, y, gamma).value;
      EXPECT_GE(gap, 0.0);
      EXPECT_LE(gap, gamma * std::log(delannoy(6, 6)) + 1e-12);
    }
  }
}

TEST(SoftDtw, NonIncreasingInGamma) {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 30; ++trial) {
    const auto x = test::random_series(rng, 5, 1), y = test::random_series(rng, 7, 1);
    double previous = std::numeric_limits<double>::infinity();
    for (double gamma : {0.001, 0.01, 0.1, 0.5, 1.0, 2.0, 10.0}) {
      const double v = soft_dtw(x, y, gamma).value;
      EXPECT_LE(v, previous + 1e-12);
      previous = v;
    }
  }
}

TEST(SoftDtw, RejectsNonPositiveGamma) {
  EXPECT_THROW(soft_dtw(series({1}), series({2}), 0.0), std::invalid_argument);
}

namespace {

void expect_gradient_matches(TimeSeries x, const TimeSeries& y, double gamma, double h = 1e-5) {
  auto ws = soft_dtw(x, y, gamma).workspace;
  const auto grad = soft_dtw_grad(ws, x, y);
  ASSERT_TRUE(grad.same_shape(x));
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double fd = test::central_difference([&] { return soft_dtw(x, y, gamma).value; }, x.values()[k], h);
    EXPECT_LT(test::rel_error(grad.values()[k], fd), 1e-4) << "coordinate " << k;
  }
}

}  // namespace

TEST(SoftDtwGrad, MatchesFiniteDifferences) {
  std::mt19937_64 rng(11);
  expect_gradient_matches(test::random_series(rng, 7, 2), test::random_series(rng, 9, 2), 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t m = 2 + rng() % 8, n = 2 + rng() % 8, d = 1 + rng() % 3;
    const double gamma = trial % 2 == 0 ? 1.0 : 0.1;
    expect_gradient_matches(test::random_series(rng, m, d), test::random_series(rng, n, d), gamma);
  }
}

TEST(SoftDtwGrad, AtIdenticalSeries) {
  std::mt19937_64 rng(12);
  const auto x = test::random_series(rng, 8, 1);
  expect_gradient_matches(x, x, 1.0);
}

TEST(SoftDtwGrad, ScaledInstance) {
  std::mt19937_64 rng(13);
  auto x = test::random_series(rng, 6, 1), y = test::random_series(rng, 7, 1);
  const double before = cost_matrix(x, y)(2, 3);
  for (double& v : x.values()) v *= 3.0;
  for (double& v : y.values()) v *= 3.0;
  EXPECT_NEAR(cost_matrix(x, y)(2, 3), 9.0 * before, 1e-12);
  expect_gradient_matches(x, y, 1.0);
}

TEST(SoftDtwGrad, ExpectedAlignmentHasUnitCorners) {
  std::mt19937_64 rng(14);
  const auto x = test::random_series(rng, 5, 1), y = test::random_series(rng, 6, 1);
  auto ws = soft_dtw(x, y, 1.0).workspace;
  soft_dtw_grad(ws, x, y);
  EXPECT_NEAR(ws.e.front(), 1.0, 1e-12);
  EXPECT_NEAR(ws.e.back(), 1.0, 1e-12);
}

TEST(SoftDtwGrad, WorkspaceMismatchIsAnError) {
  std::mt19937_64 rng(15);
  const auto x = test::random_series(rng, 5, 1), y = test::random_series(rng, 6, 1);
  auto ws = soft_dtw(x, y, 1.0).workspace;
  EXPECT_THROW(soft_dtw_grad(ws, test::random_series(rng, 4, 1), y), PreconditionError);
}
