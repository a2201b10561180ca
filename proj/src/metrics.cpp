#include "cfx/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <stdexcept>

#include "cfx/error.hpp"
#include "cfx/seed.hpp"
#include "cfx/warp.hpp"

namespace cfx::metrics {

Explanation to_explanation(const cfe::CfeResult& r) { return {r.original, r.counterfactual, r.target.index}; }

std::vector<Explanation> to_explanations(std::span<const cfe::CfeResult> results) {
  std::vector<Explanation> out;
  out.reserve(results.size());
  for (const auto& r : results) out.push_back(to_explanation(r));
  return out;
}

std::vector<bool> flip_indicators(std::span<const Explanation> batch, const nn::Classifier& classifier) {
  std::vector<bool> out;
  out.reserve(batch.size());
  for (const auto& e : batch) out.push_back(classifier.predict(e.original) != classifier.predict(e.counterfactual));
  return out;
}

double validity_score(std::span<const Explanation> batch, const nn::Classifier& classifier) {
  if (batch.empty()) throw std::invalid_argument("validity of an empty batch");
  const auto flips = flip_indicators(batch, classifier);
  return static_cast<double>(std::count(flips.begin(), flips.end(), true)) / static_cast<double>(flips.size());
}

double lp_norm(const TimeSeries& a, const TimeSeries& b, int p) {
  if (!a.same_shape(b)) throw PreconditionError("lp_norm: series shapes differ");
  if (p != 1 && p != 2) throw std::invalid_argument("lp_norm supports p = 1 or p = 2");
  const auto x = a.values();
  const auto y = b.values();
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double diff = std::abs(x[i] - y[i]);
    acc += p == 1 ? diff : diff * diff;
  }
  return p == 1 ? acc : std::sqrt(acc);
}

double lp_distance(std::span<const Explanation> batch, int p) {
  if (batch.empty()) throw std::invalid_argument("lp distance of an empty batch");
  double total = 0.0;
  for (const auto& e : batch) total += lp_norm(e.original, e.counterfactual, p);
  return total / static_cast<double>(batch.size());
}

double dtw_plausibility(const TimeSeries& series, std::size_t target, std::span<const LabeledSeries> train,
                        std::size_t neighbors, bool* short_pool) {
  std::vector<double> dists;
  for (const auto& s : train) {
    if (s.label == target) dists.push_back(warp::dtw_distance(series, s.series));
  }
  if (dists.empty()) throw PreconditionError("no train samples of target class " + std::to_string(target));
  const std::size_t take = std::min(neighbors, dists.size());
  if (short_pool != nullptr) *short_pool = take < neighbors;
  std::partial_sort(dists.begin(), dists.begin() + static_cast<std::ptrdiff_t>(take), dists.end());
  const double mean = std::accumulate(dists.begin(), dists.begin() + static_cast<std::ptrdiff_t>(take), 0.0) /
                      static_cast<double>(take);
  return mean / static_cast<double>(series.length() * series.channels());
}

double dtw_plausibility(std::span<const Explanation> batch, std::span<const LabeledSeries> train) {
  if (batch.empty()) throw std::invalid_argument("plausibility of an empty batch");
  double total = 0.0;
  for (const auto& e : batch) total += dtw_plausibility(e.counterfactual, e.target, train);
  return total / static_cast<double>(batch.size());
}

double average_path_length(std::size_t n) {
  if (n <= 1) return 0.0;
  // Exact harmonic number H(n-1); keeps c(2) = 1.
  double harmonic = 0.0;
  for (std::size_t i = 1; i < n; ++i) harmonic += 1.0 / static_cast<double>(i);
  const auto nn = static_cast<double>(n);
  return 2.0 * harmonic - 2.0 * (nn - 1.0) / nn;
}

namespace {

using Tree = IsolationForest::Tree;

struct TreeBuilder {
  std::span<const std::vector<double>> data;
  std::size_t depth_limit;
  std::mt19937_64& rng;
  Tree tree;

  std::uint32_t build(std::vector<std::size_t>& rows, std::size_t depth) {
    const auto id = static_cast<std::uint32_t>(tree.size());
    tree.push_back(IsolationForest::Node{-1, 0.0, 0, 0, static_cast<std::uint32_t>(rows.size())});
    if (depth >= depth_limit || rows.size() <= 1) return id;

    const std::size_t dim = data.front().size();
    std::vector<std::size_t> features(dim);
    std::iota(features.begin(), features.end(), 0);
    // Draw features without replacement until one is not constant on this node.
    for (std::size_t tried = 0; tried < dim; ++tried) {
      std::uniform_int_distribution<std::size_t> pick(tried, dim - 1);
      std::swap(features[tried], features[pick(rng)]);
      const std::size_t f = features[tried];
      double lo = data[rows.front()][f], hi = lo;
      for (std::size_t r : rows) {
        lo = std::min(lo, data[r][f]);
        hi = std::max(hi, data[r][f]);
      }
      if (!(hi > lo)) continue;
      std::uniform_real_distribution<double> split(lo, hi);
      const double threshold = split(rng);
      std::vector<std::size_t> left, right;
      for (std::size_t r : rows) (data[r][f] < threshold ? left : right).push_back(r);
      const std::uint32_t l = build(left, depth + 1);
      const std::uint32_t rt = build(right, depth + 1);
      tree[id].feature = static_cast<int>(f);
      tree[id].threshold = threshold;
      tree[id].left = l;
      tree[id].right = rt;
      return id;
    }
    return id;  // every feature constant: isolate no further
  }
};

}  // namespace

IsolationForest IsolationForest::fit(std::span<const std::vector<double>> reference, std::uint64_t seed,
                                     std::size_t trees, std::size_t subsample) {
  if (reference.empty()) throw std::invalid_argument("isolation forest needs a non-empty reference set");
  if (trees == 0 || subsample == 0) throw std::invalid_argument("isolation forest needs trees >= 1 and subsample >= 1");
  const std::size_t dim = reference.front().size();
  for (const auto& r : reference) {
    if (r.size() != dim) throw std::invalid_argument("isolation forest reference vectors differ in length");
  }
  IsolationForest forest;
  forest.dimension_ = dim;
  forest.psi_ = std::min(subsample, reference.size());
  forest.depth_limit_ = static_cast<std::size_t>(std::ceil(std::log2(static_cast<double>(forest.psi_))));
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> all(reference.size());
  for (std::size_t t = 0; t < trees; ++t) {
    std::iota(all.begin(), all.end(), 0);
    for (std::size_t i = 0; i < forest.psi_; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, all.size() - 1);
      std::swap(all[i], all[pick(rng)]);
    }
    std::vector<std::size_t> rows(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(forest.psi_));
    TreeBuilder builder{reference, forest.depth_limit_, rng, {}};
    builder.build(rows, 0);
    forest.trees_.push_back(std::move(builder.tree));
  }
  return forest;
}

double IsolationForest::path_length(std::span<const double> x, std::size_t tree) const {
  const Tree& nodes = trees_.at(tree);
  std::size_t id = 0;
  std::size_t depth = 0;
  while (nodes[id].feature >= 0) {
    const Node& n = nodes[id];
    id = x[static_cast<std::size_t>(n.feature)] < n.threshold ? n.left : n.right;
    ++depth;
  }
  return static_cast<double>(depth) + average_path_length(nodes[id].size);
}

double IsolationForest::score(std::span<const double> x) const {
  if (!fitted()) throw std::logic_error("isolation forest is not fitted");
  if (x.size() != dimension_) {
    throw PreconditionError("isolation forest query has " + std::to_string(x.size()) + " features, expected " +
                            std::to_string(dimension_));
  }
  double total = 0.0;
  for (std::size_t t = 0; t < trees_.size(); ++t) total += path_length(x, t);
  const double mean = total / static_cast<double>(trees_.size());
  const double norm = average_path_length(psi_);
  // A one-sample forest has c(psi) = 0; the ratio is then taken as 1 (s = 0.5).
  const double ratio = norm > 0.0 ? mean / norm : 1.0;
  return std::pow(2.0, -ratio);
}

IsolationForest iso_forest_fit(std::span<const TimeSeries> reference, std::uint64_t seed) {
  std::vector<std::vector<double>> flat;
  flat.reserve(reference.size());
  for (const auto& s : reference) flat.emplace_back(s.values().begin(), s.values().end());
  return IsolationForest::fit(flat, seed);
}

double iso_forest_score(const IsolationForest& forest, std::span<const Explanation> batch) {
  if (!forest.fitted()) throw std::logic_error("isolation forest is not fitted");
  if (batch.empty()) throw std::invalid_argument("isolation-forest score of an empty batch");
  std::size_t nominal = 0;
  for (const auto& e : batch) nominal += forest.nominal(e.counterfactual.values()) ? 1 : 0;
  return static_cast<double>(nominal) / static_cast<double>(batch.size());
}

namespace {

double mean_of(const std::vector<double>& v, const std::vector<std::size_t>& idx) {
  double s = 0.0;
  for (std::size_t i : idx) s += v[i];
  return s / static_cast<double>(idx.size());
}

}  // namespace

Evaluation evaluate(std::span<const Explanation> batch, const nn::Classifier& classifier,
                    std::span<const LabeledSeries> train, std::uint64_t seed) {
  if (batch.empty()) throw std::invalid_argument("evaluate needs at least one explanation");
  Evaluation ev;
  ev.flipped = flip_indicators(batch, classifier);

  std::map<std::size_t, IsolationForest> forests;
  for (const auto& e : batch) {
    if (forests.contains(e.target)) continue;
    std::vector<TimeSeries> reference;
    for (const auto& s : train) {
      if (s.label == e.target) reference.push_back(s.series);
    }
    if (reference.empty()) throw PreconditionError("no train samples of target class " + std::to_string(e.target));
    forests.emplace(e.target, iso_forest_fit(reference, derive_seed(seed, "eval/iso-forest", e.target)));
  }

  for (const auto& e : batch) {
    ev.l1.push_back(lp_norm(e.original, e.counterfactual, 1));
    ev.l2.push_back(lp_norm(e.original, e.counterfactual, 2));
    bool short_pool = false;
    ev.dtw_counterfactual.push_back(dtw_plausibility(e.counterfactual, e.target, train, kPlausibilityNeighbors, &short_pool));
    ev.dtw_original.push_back(dtw_plausibility(e.original, e.target, train));
    ev.short_neighbor_pool = ev.short_neighbor_pool || short_pool;
    ev.iso_score.push_back(forests.at(e.target).score(e.counterfactual.values()));
  }

  const auto summarize = [&](Aggregation mode, const std::vector<std::size_t>& idx) {
    MetricsReport r;
    r.mode = mode;
    r.n = idx.size();
    std::size_t flips = 0, nominal = 0;
    for (std::size_t i : idx) {
      flips += ev.flipped[i] ? 1 : 0;
      nominal += ev.iso_score[i] < 0.5 ? 1 : 0;
    }
    r.validity = static_cast<double>(flips) / static_cast<double>(idx.size());
    r.l1 = mean_of(ev.l1, idx);
    r.l2 = mean_of(ev.l2, idx);
    r.dtw_plausibility = mean_of(ev.dtw_counterfactual, idx);
    r.dtw_plausibility_original = mean_of(ev.dtw_original, idx);
    r.iso_nominal_fraction = static_cast<double>(nominal) / static_cast<double>(idx.size());
    return r;
  };

  std::vector<std::size_t> all(batch.size()), valid;
  std::iota(all.begin(), all.end(), 0);
  for (std::size_t i : all) {
    if (ev.flipped[i]) valid.push_back(i);
  }
  ev.all = summarize(Aggregation::all, all);
  if (!valid.empty()) ev.valid_only = summarize(Aggregation::valid_only, valid);
  return ev;
}

}  // namespace cfx::metrics
