#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "cfx/error.hpp"
#include "cfx/metrics.hpp"
#include "cfx/warp.hpp"
#include "support.hpp"

using namespace cfx;
using namespace cfx::metrics;

namespace {

nn::Classifier constant_classifier(std::size_t length, const std::vector<double>& probs) {
  std::vector<std::string> labels;
  for (std::size_t c = 0; c < probs.size(); ++c) labels.push_back(std::to_string(c));
  nn::Classifier model(1, length, labels, 0.0, 0);
  for (double& w : model.head_weight().values()) w = 0.0;
  for (std::size_t c = 0; c < probs.size(); ++c) model.head_bias()[c] = std::log(probs[c]);
  return model;
}

double oracle_plausibility(const TimeSeries& x, std::size_t target, const std::vector<LabeledSeries>& train) {
  std::vector<double> d;
  for (const auto& s : train) {
    if (s.label == target) d.push_back(warp::dtw(x, s.series).distance);
  }
  std::sort(d.begin(), d.end());
  const std::size_t k = std::min<std::size_t>(10, d.size());
  double sum = 0;
  for (std::size_t i = 0; i < k; ++i) sum += d[i];
  return sum / static_cast<double>(k) / static_cast<double>(x.size());
}

}  // namespace

TEST(Validity, CountsRecomputedFlips) {
  // A constant classifier never flips; no stored flag can change that.
  const auto model = constant_classifier(8, {0.6, 0.4});
  std::mt19937_64 rng(1);
  std::vector<Explanation> batch;
  for (int i = 0; i < 4; ++i) batch.push_back({test::random_series(rng, 8, 1), test::random_series(rng, 8, 1), 1});
  EXPECT_EQ(validity_score(batch, model), 0.0);
  EXPECT_THROW(validity_score(std::vector<Explanation>{}, model), std::invalid_argument);
}

TEST(Validity, ThreeOfFourAndAllFlipped) {
  std::mt19937_64 rng(2);
  nn::Classifier model(1, 8, {"0", "1"}, 0.0, 2);
  // one input the model sends to each class
  TimeSeries a, b;
  bool have_a = false, have_b = false;
  for (int i = 0; i < 500 && !(have_a && have_b); ++i) {
    const auto x = test::random_series(rng, 8, 1, 3.0);
    if (model.predict(x) == 0 && !have_a) {
      a = x;
      have_a = true;
    }
    if (model.predict(x) == 1 && !have_b) {
      b = x;
      have_b = true;
    }
  }
  ASSERT_TRUE(have_a && have_b);
  const std::vector<Explanation> three = {{a, b, 1}, {a, b, 1}, {b, a, 0}, {a, a, 1}};
  EXPECT_DOUBLE_EQ(validity_score(three, model), 0.75);
  const auto flags = flip_indicators(three, model);
  EXPECT_EQ(flags, (std::vector<bool>{true, true, true, false}));
  const std::vector<Explanation> all = {{a, b, 1}, {b, a, 0}};
  EXPECT_DOUBLE_EQ(validity_score(all, model), 1.0);
}

TEST(Lp, HandComputedAndIdentity) {
  const TimeSeries x(10, 1);
  TimeSeries y = x;
  y(1, 0) += 1;
  y(4, 0) += 1;
  y(9, 0) += 1;
  EXPECT_DOUBLE_EQ(lp_norm(x, y, 1), 3.0);
  EXPECT_DOUBLE_EQ(lp_norm(x, y, 2), std::sqrt(3.0));
  const std::vector<Explanation> same = {{x, x, 0}, {y, y, 0}};
  EXPECT_EQ(lp_distance(same, 1), 0.0);
  EXPECT_EQ(lp_distance(same, 2), 0.0);
  EXPECT_THROW(lp_distance(std::vector<Explanation>{}, 1), std::invalid_argument);
}

TEST(Lp, BatchMatchesRecomputationAndNormInequality) {
  std::mt19937_64 rng(3);
  std::vector<Explanation> batch;
  double l1 = 0, l2 = 0;
  for (int i = 0; i < 5; ++i) {
    const auto x = test::random_series(rng, 7, 2), y = test::random_series(rng, 7, 2);
    double a = 0, b = 0;
    for (std::size_t k = 0; k < x.size(); ++k) {
      a += std::abs(x.values()[k] - y.values()[k]);
      b += (x.values()[k] - y.values()[k]) * (x.values()[k] - y.values()[k]);
    }
    l1 += a / 5;
    l2 += std::sqrt(b) / 5;
    EXPECT_LE(lp_norm(x, y, 2), lp_norm(x, y, 1));
    batch.push_back({x, y, 0});
  }
  EXPECT_NEAR(lp_distance(batch, 1), l1, 1e-12);
  EXPECT_NEAR(lp_distance(batch, 2), l2, 1e-12);
}

TEST(Plausibility, SelfDistanceAndConstantPool) {
  std::mt19937_64 rng(4);
  const auto x = test::random_series(rng, 6, 1);
  bool short_pool = false;
  EXPECT_EQ(dtw_plausibility(x, 0, std::vector<LabeledSeries>{{x, 0}}, 10, &short_pool), 0.0);
  EXPECT_TRUE(short_pool);
  // Ten copies of x + 1 everywhere: each DTW distance is T (diagonal path of unit costs).
  auto shifted = x;
  for (double& v : shifted.values()) v += 1.0;
  std::vector<LabeledSeries> pool(10, LabeledSeries{shifted, 1});
  pool.push_back({test::random_series(rng, 6, 1), 0});
  short_pool = true;
  EXPECT_NEAR(dtw_plausibility(x, 1, pool, 10, &short_pool), 1.0, 1e-12);
  EXPECT_FALSE(short_pool);
  EXPECT_THROW(dtw_plausibility(x, 2, pool), PreconditionError);
}

TEST(Plausibility, MatchesFullSortOracle) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<LabeledSeries> train;
    for (int i = 0; i < 15; ++i) train.push_back({test::random_series(rng, 9, 2), 0});
    for (int i = 0; i < 5; ++i) train.push_back({test::random_series(rng, 9, 2), 1});
    const auto x = test::random_series(rng, 9, 2);
    EXPECT_NEAR(dtw_plausibility(x, 0, train), oracle_plausibility(x, 0, train), 1e-12);
    EXPECT_NEAR(dtw_plausibility(x, 1, train), oracle_plausibility(x, 1, train), 1e-12);
  }
}

TEST(Plausibility, CloserSeriesNeverIncreasesTheAverage) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<LabeledSeries> train;
    for (int i = 0; i < 12; ++i) train.push_back({test::random_series(rng, 8, 1), 0});
    const auto x = test::random_series(rng, 8, 1);
    const double before = dtw_plausibility(x, 0, train);
    auto near = x;
    for (double& v : near.values()) v += 1e-3;
    train.push_back({near, 0});
    EXPECT_LE(dtw_plausibility(x, 0, train), before);
  }
}

TEST(AveragePathLength, HarmonicValues) {
  EXPECT_EQ(average_path_length(0), 0.0);
  EXPECT_EQ(average_path_length(1), 0.0);
  EXPECT_DOUBLE_EQ(average_path_length(2), 1.0);
  EXPECT_NEAR(average_path_length(3), 2.0 * 1.5 - 4.0 / 3.0, 1e-15);
  double h = 0;
  for (int i = 1; i <= 255; ++i) h += 1.0 / i;
  EXPECT_NEAR(average_path_length(256), 2.0 * h - 2.0 * 255.0 / 256.0, 1e-12);
}

namespace {

std::vector<std::vector<double>> gaussian_cluster(std::mt19937_64& rng, std::size_t n, std::size_t dim, double sigma) {
  std::normal_distribution<double> noise(0.0, sigma);
  std::vector<std::vector<double>> out(n, std::vector<double>(dim));
  for (auto& v : out) {
    for (double& x : v) x = noise(rng);
  }
  return out;
}

}  // namespace

TEST(IsolationForest, StructureAndDeterminism) {
  std::mt19937_64 rng(7);
  const auto ref = gaussian_cluster(rng, 300, 5, 1.0);
  const auto a = IsolationForest::fit(ref, 42);
  const auto b = IsolationForest::fit(ref, 42);
  EXPECT_EQ(a, b);
  EXPECT_FALSE(IsolationForest::fit(ref, 43) == a);
  EXPECT_EQ(a.trees().size(), 100u);
  EXPECT_EQ(a.subsample_size(), 256u);
  EXPECT_EQ(a.depth_limit(), 8u);
  for (const auto& tree : a.trees()) {
    EXPECT_EQ(tree.front().size, 256u);
    for (const auto& node : tree) {
      if (node.feature < 0) continue;
      EXPECT_EQ(tree[node.left].size + tree[node.right].size, node.size);
      double lo = 1e300, hi = -1e300;
      for (const auto& v : ref) {
        lo = std::min(lo, v[node.feature]);
        hi = std::max(hi, v[node.feature]);
      }
      EXPECT_GE(node.threshold, lo);
      EXPECT_LE(node.threshold, hi);
    }
  }
  const auto small = IsolationForest::fit(std::vector<std::vector<double>>(ref.begin(), ref.begin() + 20), 1);
  EXPECT_EQ(small.subsample_size(), 20u);
  EXPECT_EQ(small.depth_limit(), 5u);
}

TEST(IsolationForest, OutlierScoresHigherThanCentroid) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 5; ++trial) {
    const double sigma = 0.1;
    const auto ref = gaussian_cluster(rng, 200, 4, sigma);
    const auto forest = IsolationForest::fit(ref, trial);
    const std::vector<double> centroid(4, 0.0);
    const std::vector<double> far(4, 10 * sigma);
    const std::vector<double> mid(4, 5 * sigma);
    const double s_center = forest.score(centroid), s_mid = forest.score(mid), s_far = forest.score(far);
    EXPECT_LT(s_center, s_far);
    EXPECT_LE(s_center, s_mid);
    EXPECT_LE(s_mid, s_far);
    EXPECT_GE(s_far, 0.5);
    EXPECT_FALSE(forest.nominal(far));
    for (double s : {s_center, s_mid, s_far}) {
      EXPECT_GT(s, 0.0);
      EXPECT_LE(s, 1.0);
    }
  }
}

TEST(IsolationForest, SelfScoringIsMostlyNominal) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 3; ++trial) {
    const auto ref = gaussian_cluster(rng, 100, 16, 1.0);
    const auto forest = IsolationForest::fit(ref, 100 + trial);
    std::size_t nominal = 0;
    for (const auto& v : ref) nominal += forest.nominal(v) ? 1 : 0;
    EXPECT_GE(static_cast<double>(nominal) / ref.size(), 0.9);
  }
}

TEST(IsolationForest, SinglePointForest) {
  const std::vector<std::vector<double>> ref = {{1.0, 2.0}};
  const auto forest = IsolationForest::fit(ref, 0);
  EXPECT_EQ(forest.subsample_size(), 1u);
  EXPECT_EQ(forest.score(std::vector<double>{1.0, 2.0}), 0.5);
  EXPECT_EQ(forest.score(std::vector<double>{100.0, -3.0}), 0.5);
}

TEST(IsolationForest, ErrorPaths) {
  EXPECT_THROW(IsolationForest().score(std::vector<double>{1.0}), std::logic_error);
  EXPECT_THROW(iso_forest_fit(std::vector<TimeSeries>{}, 0), std::invalid_argument);
}

TEST(IsolationForest, NominalFractionOnSeries) {
  std::mt19937_64 rng(10);
  std::vector<TimeSeries> ref;
  for (int i = 0; i < 60; ++i) ref.push_back(test::random_series(rng, 12, 1, 0.2));
  const auto forest = iso_forest_fit(ref, 3);
  std::vector<Explanation> batch;
  std::size_t expected = 0;
  for (int i = 0; i < 4; ++i) {
    batch.push_back({ref[i], ref[i], 0});
    expected += forest.nominal(ref[i].values()) ? 1 : 0;
  }
  auto far = ref[0];
  for (double& v : far.values()) v += 5.0;
  EXPECT_FALSE(forest.nominal(far.values()));
  batch.push_back({ref[0], far, 0});
  EXPECT_DOUBLE_EQ(iso_forest_score(forest, batch), static_cast<double>(expected) / 5.0);
}

TEST(Evaluate, NoOpExplanations) {
  std::mt19937_64 rng(11);
  const auto model = constant_classifier(8, {0.6, 0.4});
  std::vector<LabeledSeries> train;
  for (int i = 0; i < 24; ++i) train.push_back({test::random_series(rng, 8, 1), static_cast<std::size_t>(i % 2)});
  std::vector<Explanation> batch;
  for (int i = 0; i < 6; ++i) {
    const auto x = test::random_series(rng, 8, 1);
    batch.push_back({x, x, 1});
  }
  const auto ev = evaluate(batch, model, train, 5);
  EXPECT_EQ(ev.all.n, 6u);
  EXPECT_EQ(ev.all.validity, 0.0);
  EXPECT_EQ(ev.all.l1, 0.0);
  EXPECT_EQ(ev.all.l2, 0.0);
  EXPECT_EQ(ev.all.dtw_plausibility, ev.all.dtw_plausibility_original);
  EXPECT_FALSE(ev.valid_only.has_value());
  const auto again = evaluate(batch, model, train, 5);
  EXPECT_EQ(again.iso_score, ev.iso_score);
}

TEST(Evaluate, ValidOnlyRestrictsToFlippedExplanations) {
  std::mt19937_64 rng(12);
  nn::Classifier model(1, 8, {"0", "1"}, 0.0, 2);
  std::vector<TimeSeries> by_class[2];
  while (by_class[0].size() < 6 || by_class[1].size() < 6) {
    const auto x = test::random_series(rng, 8, 1, 3.0);
    by_class[model.predict(x)].push_back(x);
  }
  std::vector<LabeledSeries> train;
  for (std::size_t c = 0; c < 2; ++c) {
    for (const auto& x : by_class[c]) train.push_back({x, c});
  }
  const std::vector<Explanation> batch = {{by_class[0][0], by_class[1][0], 1},
                                          {by_class[0][1], by_class[1][1], 1},
                                          {by_class[0][2], by_class[0][3], 1}};
  const auto ev = evaluate(batch, model, train, 1);
  EXPECT_NEAR(ev.all.validity, 2.0 / 3.0, 1e-15);
  ASSERT_TRUE(ev.valid_only.has_value());
  EXPECT_EQ(ev.valid_only->n, 2u);
  EXPECT_EQ(ev.valid_only->validity, 1.0);
  EXPECT_NEAR(ev.valid_only->l2, (ev.l2[0] + ev.l2[1]) / 2, 1e-15);
  EXPECT_NEAR(ev.all.l1, (ev.l1[0] + ev.l1[1] + ev.l1[2]) / 3, 1e-15);
  EXPECT_LE(ev.all.l2, ev.all.l1);
  for (double s : ev.iso_score) {
    EXPECT_GT(s, 0.0);
    EXPECT_LE(s, 1.0);
  }
}
