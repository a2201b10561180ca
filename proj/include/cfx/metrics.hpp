#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "cfx/cfe.hpp"
#include "cfx/classifier.hpp"
#include "cfx/series.hpp"

namespace cfx::metrics {

/// What the metrics need from one explanation.
struct Explanation {
  TimeSeries original;
  TimeSeries counterfactual;
  std::size_t target = 0;
};

Explanation to_explanation(const cfe::CfeResult& result);
std::vector<Explanation> to_explanations(std::span<const cfe::CfeResult> results);

/// 1[f(X) != f(X')] per explanation, recomputed through the classifier.
std::vector<bool> flip_indicators(std::span<const Explanation> batch, const nn::Classifier& classifier);

/// Fraction of explanations whose prediction flips. Throws std::invalid_argument when empty.
double validity_score(std::span<const Explanation> batch, const nn::Classifier& classifier);

/// ||X - X'||_p on the flattened series, p in {1, 2}.
double lp_norm(const TimeSeries& a, const TimeSeries& b, int p);

/// Mean of lp_norm over the batch.
double lp_distance(std::span<const Explanation> batch, int p);

inline constexpr std::size_t kPlausibilityNeighbors = 10;

/// Mean of the `neighbors` smallest DTW distances from `series` to the train
/// samples of `target`, divided by d*T. Uses the whole class (and sets
/// `short_pool`) when it has fewer samples. Throws PreconditionError when the class is absent.
double dtw_plausibility(const TimeSeries& series, std::size_t target, std::span<const LabeledSeries> train,
                        std::size_t neighbors = kPlausibilityNeighbors, bool* short_pool = nullptr);

/// Batch mean of the per-explanation plausibility of the counterfactuals.
double dtw_plausibility(std::span<const Explanation> batch, std::span<const LabeledSeries> train);

/// c(n) = 2 H(n-1) - 2 (n-1) / n, the mean unsuccessful-search path length in a BST of n items.
double average_path_length(std::size_t n);

class IsolationForest {
 public:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    std::uint32_t left = 0;
    std::uint32_t right = 0;
    std::uint32_t size = 0;  // samples reaching the node during fit

    friend bool operator==(const Node&, const Node&) = default;
  };
  using Tree = std::vector<Node>;  // root at index 0

  IsolationForest() = default;

  /// Fits on flattened reference vectors (all of equal length).
  static IsolationForest fit(std::span<const std::vector<double>> reference, std::uint64_t seed,
                             std::size_t trees = 100, std::size_t subsample = 256);

  bool fitted() const { return !trees_.empty(); }
  std::size_t subsample_size() const { return psi_; }
  std::size_t depth_limit() const { return depth_limit_; }
  std::size_t dimension() const { return dimension_; }
  const std::vector<Tree>& trees() const { return trees_; }

  /// Path length of x in one tree, including the c(leaf size) correction.
  double path_length(std::span<const double> x, std::size_t tree) const;

  /// s(x) = 2^(-E[h(x)] / c(psi)), in (0, 1]. Throws std::logic_error when unfitted.
  double score(std::span<const double> x) const;

  bool nominal(std::span<const double> x) const { return score(x) < 0.5; }

  friend bool operator==(const IsolationForest&, const IsolationForest&) = default;

 private:
  std::size_t psi_ = 0;
  std::size_t depth_limit_ = 0;
  std::size_t dimension_ = 0;
  std::vector<Tree> trees_;
};

/// Forest over the flattened (T*d) reference series. Throws std::invalid_argument when empty.
IsolationForest iso_forest_fit(std::span<const TimeSeries> reference, std::uint64_t seed);

/// Fraction of counterfactuals the forest classifies as nominal (s < 0.5).
double iso_forest_score(const IsolationForest& forest, std::span<const Explanation> batch);

enum class Aggregation { all, valid_only };

struct MetricsReport {
  Aggregation mode = Aggregation::all;
  std::size_t n = 0;
  double validity = 0.0;
  double l1 = 0.0;
  double l2 = 0.0;
  double dtw_plausibility = 0.0;
  /// Same measure for the untouched originals against the same target classes.
  double dtw_plausibility_original = 0.0;
  double iso_nominal_fraction = 0.0;
};

struct Evaluation {
  MetricsReport all;
  /// Restricted to explanations whose prediction flipped; empty when none did.
  std::optional<MetricsReport> valid_only;
  /// Per-explanation values, in input order.
  std::vector<bool> flipped;
  std::vector<double> l1;
  std::vector<double> l2;
  std::vector<double> dtw_counterfactual;
  std::vector<double> dtw_original;
  std::vector<double> iso_score;
  bool short_neighbor_pool = false;
};

/// All metrics in both aggregation modes. Forests are fitted per target class
/// on that class's train samples.
Evaluation evaluate(std::span<const Explanation> batch, const nn::Classifier& classifier,
                    std::span<const LabeledSeries> train, std::uint64_t seed);

}  // namespace cfx::metrics
