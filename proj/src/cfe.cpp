#include "cfx/cfe.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>

#include "cfx/error.hpp"
#include "cfx/warp.hpp"

namespace cfx::cfe {

void validate(const CfeConfig& c) {
  if (!(c.lambda >= 0.0) || !std::isfinite(c.lambda)) throw std::invalid_argument("lambda must be a finite value >= 0");
  if (c.k == 0) throw std::invalid_argument("k must be at least 1");
  if (!(c.gamma > 0.0)) throw std::invalid_argument("gamma must be > 0");
  if (!(c.tau > 0.0 && c.tau <= 1.0)) throw std::invalid_argument("tau must lie in (0, 1]");
  if (c.iterations == 0) throw std::invalid_argument("iterations must be at least 1");
  if (!(c.learning_rate > 0.0)) throw std::invalid_argument("learning rate must be > 0");
}

std::vector<std::size_t> target_neighbor_ids(const TimeSeries& x, std::size_t target,
                                             std::span<const LabeledSeries> train, std::size_t k,
                                             NeighborMetric metric) {
  if (k == 0) throw std::invalid_argument("k must be at least 1");
  std::vector<std::pair<double, std::size_t>> scored;
  for (std::size_t i = 0; i < train.size(); ++i) {
    if (train[i].label != target) continue;
    const TimeSeries& y = train[i].series;
    if (!y.same_shape(x)) throw PreconditionError("neighbor search: train series shape differs from the query");
    double dist = 0.0;
    if (metric == NeighborMetric::euclidean) {
      const auto a = x.values();
      const auto b = y.values();
      for (std::size_t j = 0; j < a.size(); ++j) dist += (a[j] - b[j]) * (a[j] - b[j]);
    } else {
      dist = warp::dtw_distance(x, y);
    }
    scored.emplace_back(dist, i);
  }
  if (scored.size() < k) {
    throw PreconditionError("target class has " + std::to_string(scored.size()) + " train samples but k = " +
                            std::to_string(k) + "; choose k <= " + std::to_string(scored.size()));
  }
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k), scored.end());
  std::vector<std::size_t> ids(k);
  for (std::size_t i = 0; i < k; ++i) ids[i] = scored[i].second;
  return ids;
}

std::vector<TimeSeries> target_neighbors(const TimeSeries& x, std::size_t target,
                                         std::span<const LabeledSeries> train, std::size_t k,
                                         NeighborMetric metric) {
  std::vector<TimeSeries> out;
  for (std::size_t id : target_neighbor_ids(x, target, train, k, metric)) out.push_back(train[id].series);
  return out;
}

CompositeLoss composite_loss(const TimeSeries& candidate, const TimeSeries& original,
                             std::span<const TimeSeries> neighbors, const nn::Classifier& classifier,
                             std::size_t target, const CfeConfig& config) {
  if (neighbors.empty()) throw std::invalid_argument("composite loss needs k >= 1 neighbors");
  if (!candidate.same_shape(original)) throw PreconditionError("counterfactual and original differ in shape");
  if (target >= classifier.num_classes()) throw PreconditionError("target class out of range");

  const std::size_t T = candidate.length();
  const std::size_t d = candidate.channels();
  const double scale = 1.0 / static_cast<double>(d * T);
  CompositeLoss out;
  out.gradient = TimeSeries(T, d);
  auto grad = out.gradient.values();

  const auto xc = candidate.values();
  const auto xo = original.values();
  for (std::size_t i = 0; i < xc.size(); ++i) {
    const double diff = xc[i] - xo[i];
    out.terms.prox += diff * diff * scale;
    out.terms.sparse += std::abs(diff) * scale;
    const double sign = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
    grad[i] += (2.0 * diff + sign) * scale;
  }

  // Validity hinge through the frozen classifier.
  ad::Tape tape;
  const ad::Var input = tape.leaf(nn::to_batch(candidate), true);
  const nn::Graph g = classifier.build(input, nn::Mode::inference, false);
  const auto probs = tape.value(g.probabilities).values();
  out.probabilities.assign(probs.begin(), probs.end());
  const double p_target = out.probabilities[target];
  out.terms.valid = std::max(0.0, config.tau - p_target);
  if (p_target < config.tau && config.lambda != 0.0) {
    const ad::Var picked = ad::select(g.probabilities, target);
    tape.backward(picked);
    const auto dp = tape.grad(input);  // 1 x d x T
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t ch = 0; ch < d; ++ch) out.gradient(t, ch) -= config.lambda * dp[ch * T + t];
    }
  }

  // Soft-DTW alignment with the fixed neighbor set.
  const double inv_k = 1.0 / static_cast<double>(neighbors.size());
  for (const TimeSeries& y : neighbors) {
    auto sd = warp::soft_dtw(candidate, y, config.gamma);
    out.terms.dtw += sd.value * inv_k;
    if (config.lambda != 0.0) {
      const TimeSeries g_dtw = warp::soft_dtw_grad(sd.workspace, candidate, y);
      const auto gv = g_dtw.values();
      for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += config.lambda * inv_k * gv[i];
    }
  }

  out.terms.total = out.terms.prox + out.terms.sparse + config.lambda * (out.terms.valid + out.terms.dtw);
  return out;
}

CfeResult generate(const TimeSeries& x, std::size_t target, const nn::Classifier& classifier,
                   std::span<const LabeledSeries> train, const CfeConfig& config) {
  validate(config);
  classifier.check_input(x.length(), x.channels());
  const auto& names = classifier.labels();
  if (target >= names.size()) throw PreconditionError("target class out of range");

  CfeResult result;
  result.original = x;
  result.target = ClassLabel{target, names[target]};
  const auto probs0 = classifier.predict_proba(x);
  const auto source = static_cast<std::size_t>(std::max_element(probs0.begin(), probs0.end()) - probs0.begin());
  result.source = ClassLabel{source, names[source]};

  if (source == target) {
    result.counterfactual = x;
    result.valid = true;
    result.trivial = true;
    result.target_probability = probs0[target];
    return result;
  }

  result.neighbor_ids = target_neighbor_ids(x, target, train, config.k, config.neighbor_metric);
  std::vector<TimeSeries> neighbors;
  for (std::size_t id : result.neighbor_ids) neighbors.push_back(train[id].series);

  TimeSeries current = x;
  ad::Adam adam({.learning_rate = config.learning_rate});
  std::optional<TimeSeries> best;
  double best_total = std::numeric_limits<double>::infinity();
  double best_probability = 0.0;
  double last_probability = 0.0;
  result.trajectory.reserve(config.iterations + 1);

  for (std::size_t it = 0;; ++it) {
    CompositeLoss loss = composite_loss(current, x, neighbors, classifier, target, config);
    result.trajectory.push_back(loss.terms);
    const auto& p = loss.probabilities;
    const auto predicted = static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
    last_probability = p[target];
    if (predicted == target && loss.terms.total < best_total) {
      best_total = loss.terms.total;
      best = current;
      best_probability = p[target];
      result.selected_iteration = it;
    }
    if (it == config.iterations) break;
    adam.step(current.values(), loss.gradient.values());
  }
  result.iterations_used = config.iterations;

  if (best) {
    result.counterfactual = std::move(*best);
    result.target_probability = best_probability;
  } else {
    result.counterfactual = std::move(current);
    result.selected_iteration = config.iterations;
    result.target_probability = last_probability;
  }
  result.valid = classifier.predict(result.counterfactual) == target;
  return result;
}

TargetPolicy TargetPolicy::parse(const std::string& text) {
  if (text == "second") return TargetPolicy{Kind::second, {}};
  constexpr std::string_view prefix = "fixed:";
  if (text.starts_with(prefix) && text.size() > prefix.size()) {
    return TargetPolicy{Kind::fixed, text.substr(prefix.size())};
  }
  throw ConfigError("target policy must be 'second' or 'fixed:<label>', got '" + text + "'");
}

std::string TargetPolicy::to_string() const { return kind == Kind::second ? "second" : "fixed:" + label; }

std::size_t pick_target(const TimeSeries& x, const nn::Classifier& classifier, const TargetPolicy& policy) {
  const auto probs = classifier.predict_proba(x);
  if (probs.size() < 2) throw PreconditionError("target selection needs at least two classes");
  std::vector<std::size_t> order(probs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return probs[a] > probs[b]; });
  if (policy.kind == TargetPolicy::Kind::second) return order[1];

  const auto& names = classifier.labels();
  const auto it = std::find(names.begin(), names.end(), policy.label);
  if (it == names.end()) throw PreconditionError("unknown target label '" + policy.label + "'");
  const auto target = static_cast<std::size_t>(it - names.begin());
  if (target == order[0]) {
    throw PreconditionError("target label '" + policy.label + "' is already the predicted class");
  }
  return target;
}

}  // namespace cfx::cfe
