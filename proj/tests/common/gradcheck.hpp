#pragma once

#include <algorithm>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

#include "cfx/autodiff.hpp"
#include "support.hpp"

namespace cfx::test {

/// Scalar <w, x> recorded through the public Tape::record hook.
inline ad::Var weighted_sum(ad::Var x, std::vector<double> w) {
  ad::Tape& tape = *x.tape;
  const auto xv = tape.value(x).values();
  const double value = std::inner_product(xv.begin(), xv.end(), w.begin(), 0.0);
  const ad::Var inputs[] = {x};
  return tape.record(ad::Tensor({1}, {value}), inputs, [x, w = std::move(w)](ad::Tape& tp, ad::Var self) {
    const double g = tp.grad_out(self)[0];
    auto gx = tp.grad_in(x);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g * w[i];
  });
}

using OpBuilder = std::function<ad::Var(std::span<const ad::Var>)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t coordinates = 0;
};

/// Compares reverse-mode gradients of <w, op(inputs)> (w random) with central
/// differences. Checks every coordinate when there are at most `max_coords`,
/// otherwise a random sample of that many per input.
inline GradCheckResult check_gradients(const std::vector<ad::Tensor>& inputs, const OpBuilder& op,
                                       std::uint64_t seed, double h = 1e-4, std::size_t max_coords = 40) {
  std::mt19937_64 rng(seed);
  std::vector<double> weights;

  const auto evaluate = [&](const std::vector<ad::Tensor>& at, std::vector<std::vector<double>>* grads) {
    ad::Tape tape;
    std::vector<ad::Var> leaves;
    for (const auto& t : at) leaves.push_back(tape.leaf(t, true));
    const ad::Var out = op(leaves);
    if (weights.empty()) {
      std::normal_distribution<double> n(0.0, 1.0);
      weights.resize(tape.value(out).size());
      for (double& w : weights) w = n(rng);
    }
    const ad::Var loss = weighted_sum(out, weights);
    const double value = tape.value(loss)[0];
    if (grads != nullptr) {
      tape.backward(loss);
      for (const auto& leaf : leaves) {
        const auto g = tape.grad(leaf);
        grads->emplace_back(g.begin(), g.end());
      }
    }
    return value;
  };

  std::vector<std::vector<double>> analytic;
  evaluate(inputs, &analytic);

  GradCheckResult result;
  std::vector<ad::Tensor> probe = inputs;
  for (std::size_t a = 0; a < inputs.size(); ++a) {
    std::vector<std::size_t> coords(inputs[a].size());
    std::iota(coords.begin(), coords.end(), 0);
    if (coords.size() > max_coords) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(max_coords);
    }
    for (std::size_t c : coords) {
      const double fd = central_difference([&] { return evaluate(probe, nullptr); }, probe[a][c], h);
      result.max_rel_error = std::max(result.max_rel_error, rel_error(analytic[a][c], fd));
      ++result.coordinates;
    }
  }
  return result;
}

inline ad::Tensor random_tensor(std::mt19937_64& rng, std::vector<std::size_t> shape, double scale = 1.0) {
  ad::Tensor t(std::move(shape));
  std::normal_distribution<double> n(0.0, scale);
  for (double& v : t.values()) v = n(rng);
  return t;
}

/// Moves entries away from 0 so a step of h never crosses the ReLU kink.
inline void avoid_zero(ad::Tensor& t, double margin = 1e-2) {
  for (double& v : t.values()) {
    if (std::abs(v) < margin) v = v < 0 ? -margin * 10 : margin * 10;
  }
}

/// True when two values in one pooling window are closer than `gap`.
inline bool has_pool_ties(const ad::Tensor& t, std::size_t width, double gap = 1e-3) {
  const std::size_t T = t.dim(2);
  for (std::size_t row = 0; row < t.size() / T; ++row) {
    for (std::size_t w = 0; w + width <= T; w += width) {
      for (std::size_t i = 0; i < width; ++i) {
        for (std::size_t j = i + 1; j < width; ++j) {
          if (std::abs(t[row * T + w + i] - t[row * T + w + j]) < gap) return true;
        }
      }
    }
  }
  return false;
}

}  // namespace cfx::test
