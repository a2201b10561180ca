#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cfx/classifier.hpp"
#include "cfx/series.hpp"

namespace cfx::cfe {

enum class NeighborMetric { euclidean, dtw };

struct CfeConfig {
  double lambda = 1.0;       // weight of the validity + alignment terms
  std::size_t k = 10;        // target-class neighbors
  double gamma = 1.0;        // soft-DTW smoothing
  double tau = 0.5;          // hinge threshold on p(target | X')
  std::size_t iterations = 200;
  double learning_rate = 0.05;
  std::uint64_t seed = 0;
  NeighborMetric neighbor_metric = NeighborMetric::euclidean;
};

/// Throws std::invalid_argument for out-of-range values.
void validate(const CfeConfig& config);

struct LossTerms {
  double prox = 0.0;
  double sparse = 0.0;
  double valid = 0.0;
  double dtw = 0.0;
  double total = 0.0;

  friend bool operator==(const LossTerms&, const LossTerms&) = default;
};

struct CfeResult {
  TimeSeries original;
  TimeSeries counterfactual;
  ClassLabel source;
  ClassLabel target;
  bool valid = false;
  /// The input was already predicted as the target; nothing was optimized.
  bool trivial = false;
  /// One entry per evaluated iterate, X'_0 = X through X'_iterations.
  std::vector<LossTerms> trajectory;
  std::vector<std::size_t> neighbor_ids;
  std::size_t iterations_used = 0;
  /// Index into `trajectory` of the returned iterate.
  std::size_t selected_iteration = 0;
  double target_probability = 0.0;

  friend bool operator==(const CfeResult&, const CfeResult&) = default;
};

/// Train indices of the k target-class series closest to x, nearest first;
/// ties go to the lower index. Throws PreconditionError when the class has fewer than k samples.
std::vector<std::size_t> target_neighbor_ids(const TimeSeries& x, std::size_t target,
                                             std::span<const LabeledSeries> train, std::size_t k,
                                             NeighborMetric metric = NeighborMetric::euclidean);

std::vector<TimeSeries> target_neighbors(const TimeSeries& x, std::size_t target,
                                         std::span<const LabeledSeries> train, std::size_t k,
                                         NeighborMetric metric = NeighborMetric::euclidean);

struct CompositeLoss {
  LossTerms terms;
  /// d total / d X', shaped like X'.
  TimeSeries gradient;
  /// Classifier probabilities at X'.
  std::vector<double> probabilities;
};

/// L = prox + sparse + lambda * (valid + dtw) and its gradient in X'.
/// The classifier runs in inference mode; sign(0) is taken as 0.
CompositeLoss composite_loss(const TimeSeries& candidate, const TimeSeries& original,
                             std::span<const TimeSeries> neighbors, const nn::Classifier& classifier,
                             std::size_t target, const CfeConfig& config);

/// Adam on X' starting from X. Returns the lowest-loss iterate predicted as
/// the target, or the final iterate with valid = false when none is.
CfeResult generate(const TimeSeries& x, std::size_t target, const nn::Classifier& classifier,
                   std::span<const LabeledSeries> train, const CfeConfig& config);

struct TargetPolicy {
  enum class Kind { second, fixed } kind = Kind::second;
  std::string label;  // for Kind::fixed

  /// "second" or "fixed:<label>". Throws ConfigError otherwise.
  static TargetPolicy parse(const std::string& text);
  std::string to_string() const;
};

/// "second": the class with the second-highest probability (ties to the lower
/// index). "fixed": the named class; PreconditionError when it is the prediction.
std::size_t pick_target(const TimeSeries& x, const nn::Classifier& classifier, const TargetPolicy& policy);

}  // namespace cfx::cfe
