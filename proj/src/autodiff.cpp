#include "cfx/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <string>

namespace cfx::ad {
namespace {

std::size_t product(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const std::vector<std::size_t>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? "," : "") + std::to_string(shape[i]);
  return s + "]";
}

void expect_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw std::invalid_argument(std::string(op) + ": expected rank " + std::to_string(rank) + ", got shape " +
                                shape_str(t.shape()));
  }
}

Tape& tape_of(Var a, Var b) {
  if (a.tape == nullptr || a.tape != b.tape) throw std::invalid_argument("vars belong to different tapes");
  return *a.tape;
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)), values_(product(shape_), fill) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  if (product(shape_) != values_.size()) {
    throw std::invalid_argument("tensor shape " + shape_str(shape_) + " does not match " +
                                std::to_string(values_.size()) + " values");
  }
}

Var Tape::leaf(Tensor value, bool requires_grad) {
  if (consumed_) throw std::logic_error("tape already consumed by backward()");
  value.drop_grad();
  nodes_.push_back(Node{std::move(value), requires_grad, nullptr});
  return Var{this, nodes_.size() - 1};
}

Var Tape::record(Tensor value, std::span<const Var> inputs, BackwardFn backward) {
  if (consumed_) throw std::logic_error("tape already consumed by backward()");
  bool needs = false;
  for (const Var& in : inputs) {
    if (in.tape != this) throw std::invalid_argument("input var recorded on another tape");
    needs = needs || nodes_[in.id].requires_grad;
  }
  value.drop_grad();
  nodes_.push_back(Node{std::move(value), needs, needs ? std::move(backward) : nullptr});
  return Var{this, nodes_.size() - 1};
}

void Tape::backward(Var output) {
  if (output.tape != this) throw std::invalid_argument("backward: output belongs to another tape");
  if (consumed_) throw std::logic_error("backward: tape already consumed");
  if (nodes_.at(output.id).value.size() != 1) {
    throw std::logic_error("backward: output must be a scalar, got shape " +
                           shape_str(nodes_[output.id].value.shape()));
  }
  consumed_ = true;
  for (std::size_t i = 0; i <= output.id; ++i) {
    if (nodes_[i].requires_grad) nodes_[i].value.zero_grad();
  }
  if (!nodes_[output.id].requires_grad) return;
  nodes_[output.id].value.grad()[0] = 1.0;
  for (std::size_t i = output.id + 1; i-- > 0;) {
    if (nodes_[i].backward) nodes_[i].backward(*this, Var{this, i});
  }
}

std::span<const double> Tape::grad(Var v) const {
  const Node& node = nodes_.at(v.id);
  if (!consumed_) throw std::logic_error("grad: backward() has not run");
  if (!node.requires_grad) throw std::logic_error("grad: node does not require a gradient");
  return node.value.grad();
}

Var conv1d(Var x, Var kernel, Var bias) {
  Tape& tape = tape_of(x, kernel);
  tape_of(x, bias);
  const Tensor& xv = tape.value(x);
  const Tensor& wv = tape.value(kernel);
  const Tensor& bv = tape.value(bias);
  expect_rank(xv, 3, "conv1d");
  expect_rank(wv, 3, "conv1d kernel");
  const std::size_t B = xv.dim(0), Cin = xv.dim(1), T = xv.dim(2);
  const std::size_t Cout = wv.dim(0), K = wv.dim(2);
  if (wv.dim(1) != Cin) {
    throw std::invalid_argument("conv1d: kernel expects " + std::to_string(wv.dim(1)) + " input channels, got " +
                                std::to_string(Cin));
  }
  if (K % 2 == 0) throw std::invalid_argument("conv1d: kernel width must be odd");
  if (bv.size() != Cout) throw std::invalid_argument("conv1d: bias size mismatch");

  // Output t reads input t + k - K/2; [lo, hi) is the range of t where that stays in bounds.
  struct Tap {
    std::ptrdiff_t shift, lo, hi;
  };
  std::vector<Tap> taps(K);
  for (std::size_t k = 0; k < K; ++k) {
    const auto shift = static_cast<std::ptrdiff_t>(k) - static_cast<std::ptrdiff_t>(K / 2);
    const auto len = static_cast<std::ptrdiff_t>(T);
    taps[k] = Tap{shift, std::max<std::ptrdiff_t>(0, -shift), std::min<std::ptrdiff_t>(len, len - shift)};
  }

  Tensor out({B, Cout, T});
  const double* xp = xv.values().data();
  const double* wp = wv.values().data();
  double* op = out.values().data();
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t co = 0; co < Cout; ++co) {
      double* orow = op + (b * Cout + co) * T;
      std::fill(orow, orow + T, bv[co]);
      for (std::size_t ci = 0; ci < Cin; ++ci) {
        const double* xrow = xp + (b * Cin + ci) * T;
        for (std::size_t k = 0; k < K; ++k) {
          const double w = wp[(co * Cin + ci) * K + k];
          const Tap tap = taps[k];
          for (std::ptrdiff_t t = tap.lo; t < tap.hi; ++t) orow[t] += w * xrow[t + tap.shift];
        }
      }
    }
  }

  const Var inputs[] = {x, kernel, bias};
  return tape.record(std::move(out), inputs, [=](Tape& tp, Var self) {
    const double* gy = tp.grad_out(self).data();
    const bool need_x = tp.requires_grad(x);
    const bool need_w = tp.requires_grad(kernel);
    const bool need_b = tp.requires_grad(bias);
    const double* xd = tp.value(x).values().data();
    const double* wd = tp.value(kernel).values().data();
    double* gx = need_x ? tp.grad_in(x).data() : nullptr;
    double* gw = need_w ? tp.grad_in(kernel).data() : nullptr;
    double* gb = need_b ? tp.grad_in(bias).data() : nullptr;
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t co = 0; co < Cout; ++co) {
        const double* grow = gy + (b * Cout + co) * T;
        if (gb) {
          double acc = 0.0;
          for (std::size_t t = 0; t < T; ++t) acc += grow[t];
          gb[co] += acc;
        }
        for (std::size_t ci = 0; ci < Cin; ++ci) {
          const std::size_t xoff = (b * Cin + ci) * T;
          for (std::size_t k = 0; k < K; ++k) {
            const Tap tap = taps[k];
            const std::size_t widx = (co * Cin + ci) * K + k;
            if (gw) {
              double acc = 0.0;
              for (std::ptrdiff_t t = tap.lo; t < tap.hi; ++t) acc += grow[t] * xd[xoff + t + tap.shift];
              gw[widx] += acc;
            }
            if (gx) {
              const double w = wd[widx];
              double* gxrow = gx + xoff;
              for (std::ptrdiff_t t = tap.lo; t < tap.hi; ++t) gxrow[t + tap.shift] += w * grow[t];
            }
          }
        }
      }
    }
  });
}

Var batch_norm_train(Var x, Var gamma, Var beta, BatchMoments* moments) {
  Tape& tape = tape_of(x, gamma);
  tape_of(x, beta);
  const Tensor& xv = tape.value(x);
  expect_rank(xv, 3, "batch_norm_train");
  const std::size_t B = xv.dim(0), C = xv.dim(1), T = xv.dim(2);
  if (tape.value(gamma).size() != C || tape.value(beta).size() != C) {
    throw std::invalid_argument("batch_norm_train: affine parameter size mismatch");
  }
  const double n = static_cast<double>(B * T);
  std::vector<double> mean(C, 0.0), var(C, 0.0), inv_std(C);
  const double* xp = xv.values().data();
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t c = 0; c < C; ++c) {
      const double* row = xp + (b * C + c) * T;
      for (std::size_t t = 0; t < T; ++t) mean[c] += row[t];
    }
  }
  for (double& m : mean) m /= n;
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t c = 0; c < C; ++c) {
      const double* row = xp + (b * C + c) * T;
      for (std::size_t t = 0; t < T; ++t) var[c] += (row[t] - mean[c]) * (row[t] - mean[c]);
    }
  }
  for (std::size_t c = 0; c < C; ++c) {
    var[c] /= n;
    inv_std[c] = 1.0 / std::sqrt(var[c] + kBatchNormEps);
  }

  const double* g = tape.value(gamma).values().data();
  const double* be = tape.value(beta).values().data();
  Tensor xhat({B, C, T});
  Tensor out({B, C, T});
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t c = 0; c < C; ++c) {
      const std::size_t off = (b * C + c) * T;
      for (std::size_t t = 0; t < T; ++t) {
        const double h = (xp[off + t] - mean[c]) * inv_std[c];
        xhat[off + t] = h;
        out[off + t] = g[c] * h + be[c];
      }
    }
  }
  if (moments != nullptr) *moments = BatchMoments{mean, var, B * T};

  const Var inputs[] = {x, gamma, beta};
  return tape.record(std::move(out), inputs, [=, xhat = std::move(xhat)](Tape& tp, Var self) {
    const double* gy = tp.grad_out(self).data();
    const double* gam = tp.value(gamma).values().data();
    std::vector<double> sum_dy(C, 0.0), sum_dy_xhat(C, 0.0);
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t c = 0; c < C; ++c) {
        const std::size_t off = (b * C + c) * T;
        for (std::size_t t = 0; t < T; ++t) {
          sum_dy[c] += gy[off + t];
          sum_dy_xhat[c] += gy[off + t] * xhat[off + t];
        }
      }
    }
    if (tp.requires_grad(gamma)) {
      auto gg = tp.grad_in(gamma);
      for (std::size_t c = 0; c < C; ++c) gg[c] += sum_dy_xhat[c];
    }
    if (tp.requires_grad(beta)) {
      auto gb = tp.grad_in(beta);
      for (std::size_t c = 0; c < C; ++c) gb[c] += sum_dy[c];
    }
    if (tp.requires_grad(x)) {
      double* gx = tp.grad_in(x).data();
      for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t c = 0; c < C; ++c) {
          const std::size_t off = (b * C + c) * T;
          const double scale = gam[c] * inv_std[c] / n;
          for (std::size_t t = 0; t < T; ++t) {
            gx[off + t] += scale * (n * gy[off + t] - sum_dy[c] - xhat[off + t] * sum_dy_xhat[c]);
          }
        }
      }
    }
  });
}

Var batch_norm_infer(Var x, Var gamma, Var beta, std::span<const double> running_mean,
                     std::span<const double> running_var) {
  Tape& tape = tape_of(x, gamma);
  tape_of(x, beta);
  const Tensor& xv = tape.value(x);
  expect_rank(xv, 3, "batch_norm_infer");
  const std::size_t B = xv.dim(0), C = xv.dim(1), T = xv.dim(2);
  if (tape.value(gamma).size() != C || tape.value(beta).size() != C || running_mean.size() != C ||
      running_var.size() != C) {
    throw std::invalid_argument("batch_norm_infer: parameter size mismatch");
  }
  std::vector<double> inv_std(C), mean(running_mean.begin(), running_mean.end());
  for (std::size_t c = 0; c < C; ++c) inv_std[c] = 1.0 / std::sqrt(running_var[c] + kBatchNormEps);

  const double* g = tape.value(gamma).values().data();
  const double* be = tape.value(beta).values().data();
  const double* xp = xv.values().data();
  Tensor out({B, C, T});
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t c = 0; c < C; ++c) {
      const std::size_t off = (b * C + c) * T;
      const double scale = g[c] * inv_std[c];
      const double shift = be[c] - mean[c] * scale;
      for (std::size_t t = 0; t < T; ++t) out[off + t] = xp[off + t] * scale + shift;
    }
  }

  const Var inputs[] = {x, gamma, beta};
  return tape.record(std::move(out), inputs, [=](Tape& tp, Var self) {
    const double* gy = tp.grad_out(self).data();
    const double* xd = tp.value(x).values().data();
    const double* gam = tp.value(gamma).values().data();
    const bool need_x = tp.requires_grad(x);
    const bool need_g = tp.requires_grad(gamma);
    const bool need_b = tp.requires_grad(beta);
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t c = 0; c < C; ++c) {
        const std::size_t off = (b * C + c) * T;
        if (need_x) {
          double* gx = tp.grad_in(x).data() + off;
          const double scale = gam[c] * inv_std[c];
          for (std::size_t t = 0; t < T; ++t) gx[t] += gy[off + t] * scale;
        }
        if (need_g || need_b) {
          double sg = 0.0, sb = 0.0;
          for (std::size_t t = 0; t < T; ++t) {
            sg += gy[off + t] * (xd[off + t] - mean[c]) * inv_std[c];
            sb += gy[off + t];
          }
          if (need_g) tp.grad_in(gamma)[c] += sg;
          if (need_b) tp.grad_in(beta)[c] += sb;
        }
      }
    }
  });
}

Var relu(Var x) {
  Tape& tape = *x.tape;
  Tensor out = tape.value(x);
  out.drop_grad();
  for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
  const Var inputs[] = {x};
  return tape.record(std::move(out), inputs, [x](Tape& tp, Var self) {
    const auto gy = tp.grad_out(self);
    const auto xv = tp.value(x).values();
    auto gx = tp.grad_in(x);
    for (std::size_t i = 0; i < gx.size(); ++i) {
      if (xv[i] > 0.0) gx[i] += gy[i];
    }
  });
}

Var max_pool1d(Var x, std::size_t width) {
  Tape& tape = *x.tape;
  const Tensor& xv = tape.value(x);
  expect_rank(xv, 3, "max_pool1d");
  if (width == 0) throw std::invalid_argument("max_pool1d: width must be positive");
  const std::size_t B = xv.dim(0), C = xv.dim(1), T = xv.dim(2);
  const std::size_t To = T / width;
  if (To == 0) {
    throw std::invalid_argument("max_pool1d: sequence of length " + std::to_string(T) + " is shorter than width " +
                                std::to_string(width));
  }
  Tensor out({B, C, To});
  std::vector<std::size_t> argmax(B * C * To);
  for (std::size_t r = 0; r < B * C; ++r) {
    const double* row = xv.values().data() + r * T;
    for (std::size_t o = 0; o < To; ++o) {
      std::size_t best = o * width;
      for (std::size_t j = best + 1; j < (o + 1) * width; ++j) {
        if (row[j] > row[best]) best = j;
      }
      out[r * To + o] = row[best];
      argmax[r * To + o] = r * T + best;
    }
  }
  const Var inputs[] = {x};
  return tape.record(std::move(out), inputs, [x, argmax = std::move(argmax)](Tape& tp, Var self) {
    const auto gy = tp.grad_out(self);
    auto gx = tp.grad_in(x);
    for (std::size_t i = 0; i < gy.size(); ++i) gx[argmax[i]] += gy[i];
  });
}

Var global_avg_pool(Var x) {
  Tape& tape = *x.tape;
  const Tensor& xv = tape.value(x);
  expect_rank(xv, 3, "global_avg_pool");
  const std::size_t B = xv.dim(0), C = xv.dim(1), T = xv.dim(2);
  Tensor out({B, C});
  for (std::size_t r = 0; r < B * C; ++r) {
    const double* row = xv.values().data() + r * T;
    out[r] = std::accumulate(row, row + T, 0.0) / static_cast<double>(T);
  }
  const Var inputs[] = {x};
  return tape.record(std::move(out), inputs, [x, B, C, T](Tape& tp, Var self) {
    const auto gy = tp.grad_out(self);
    auto gx = tp.grad_in(x);
    const double inv = 1.0 / static_cast<double>(T);
    for (std::size_t r = 0; r < B * C; ++r) {
      for (std::size_t t = 0; t < T; ++t) gx[r * T + t] += gy[r] * inv;
    }
  });
}

Var dropout(Var x, double rate, std::mt19937_64& rng) {
  if (rate < 0.0 || rate >= 1.0) throw std::invalid_argument("dropout rate must lie in [0, 1)");
  Tape& tape = *x.tape;
  const Tensor& xv = tape.value(x);
  std::vector<double> mask(xv.size());
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const double keep_scale = 1.0 / (1.0 - rate);
  for (double& m : mask) m = uniform(rng) < rate ? 0.0 : keep_scale;
  Tensor out = xv;
  out.drop_grad();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  const Var inputs[] = {x};
  return tape.record(std::move(out), inputs, [x, mask = std::move(mask)](Tape& tp, Var self) {
    const auto gy = tp.grad_out(self);
    auto gx = tp.grad_in(x);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[i] * mask[i];
  });
}

Var linear(Var x, Var weight, Var bias) {
  Tape& tape = tape_of(x, weight);
  tape_of(x, bias);
  const Tensor& xv = tape.value(x);
  const Tensor& wv = tape.value(weight);
  expect_rank(xv, 2, "linear");
  expect_rank(wv, 2, "linear weight");
  const std::size_t B = xv.dim(0), In = xv.dim(1), Out = wv.dim(0);
  if (wv.dim(1) != In) {
    throw std::invalid_argument("linear: weight expects " + std::to_string(wv.dim(1)) + " features, got " +
                                std::to_string(In));
  }
  if (tape.value(bias).size() != Out) throw std::invalid_argument("linear: bias size mismatch");
  Tensor out({B, Out});
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t o = 0; o < Out; ++o) {
      double acc = tape.value(bias)[o];
      for (std::size_t i = 0; i < In; ++i) acc += wv[o * In + i] * xv[b * In + i];
      out[b * Out + o] = acc;
    }
  }
  const Var inputs[] = {x, weight, bias};
  return tape.record(std::move(out), inputs, [=](Tape& tp, Var self) {
    const auto gy = tp.grad_out(self);
    const auto xd = tp.value(x).values();
    const auto wd = tp.value(weight).values();
    const bool need_x = tp.requires_grad(x);
    const bool need_w = tp.requires_grad(weight);
    const bool need_b = tp.requires_grad(bias);
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t o = 0; o < Out; ++o) {
        const double g = gy[b * Out + o];
        if (need_b) tp.grad_in(bias)[o] += g;
        if (need_w) {
          auto gw = tp.grad_in(weight);
          for (std::size_t i = 0; i < In; ++i) gw[o * In + i] += g * xd[b * In + i];
        }
        if (need_x) {
          auto gx = tp.grad_in(x);
          for (std::size_t i = 0; i < In; ++i) gx[b * In + i] += g * wd[o * In + i];
        }
      }
    }
  });
}

Var softmax(Var x) {
  Tape& tape = *x.tape;
  const Tensor& xv = tape.value(x);
  expect_rank(xv, 2, "softmax");
  const std::size_t B = xv.dim(0), C = xv.dim(1);
  Tensor out({B, C});
  for (std::size_t b = 0; b < B; ++b) {
    const double* row = xv.values().data() + b * C;
    const double peak = *std::max_element(row, row + C);
    double total = 0.0;
    for (std::size_t c = 0; c < C; ++c) total += out[b * C + c] = std::exp(row[c] - peak);
    for (std::size_t c = 0; c < C; ++c) out[b * C + c] /= total;
  }
  const Var inputs[] = {x};
  return tape.record(std::move(out), inputs, [x, B, C](Tape& tp, Var self) {
    const auto gy = tp.grad_out(self);
    const auto y = tp.value(self).values();
    auto gx = tp.grad_in(x);
    for (std::size_t b = 0; b < B; ++b) {
      double dot = 0.0;
      for (std::size_t c = 0; c < C; ++c) dot += gy[b * C + c] * y[b * C + c];
      for (std::size_t c = 0; c < C; ++c) gx[b * C + c] += y[b * C + c] * (gy[b * C + c] - dot);
    }
  });
}

Var softmax_cross_entropy(Var logits, std::span<const std::size_t> labels) {
  Tape& tape = *logits.tape;
  const Tensor& zv = tape.value(logits);
  expect_rank(zv, 2, "softmax_cross_entropy");
  const std::size_t B = zv.dim(0), C = zv.dim(1);
  if (labels.size() != B) throw std::invalid_argument("softmax_cross_entropy: one label per row expected");
  std::vector<double> probs(B * C);
  double loss = 0.0;
  for (std::size_t b = 0; b < B; ++b) {
    if (labels[b] >= C) throw std::invalid_argument("softmax_cross_entropy: label out of range");
    const double* row = zv.values().data() + b * C;
    const double peak = *std::max_element(row, row + C);
    double total = 0.0;
    for (std::size_t c = 0; c < C; ++c) total += probs[b * C + c] = std::exp(row[c] - peak);
    for (std::size_t c = 0; c < C; ++c) probs[b * C + c] /= total;
    loss += std::log(total) + peak - row[labels[b]];
  }
  loss /= static_cast<double>(B);
  std::vector<std::size_t> targets(labels.begin(), labels.end());
  const Var inputs[] = {logits};
  return tape.record(Tensor({1}, {loss}), inputs,
                     [logits, B, C, probs = std::move(probs), targets = std::move(targets)](Tape& tp, Var self) {
                       const double g = tp.grad_out(self)[0] / static_cast<double>(B);
                       auto gz = tp.grad_in(logits);
                       for (std::size_t b = 0; b < B; ++b) {
                         for (std::size_t c = 0; c < C; ++c) {
                           gz[b * C + c] += g * (probs[b * C + c] - (c == targets[b] ? 1.0 : 0.0));
                         }
                       }
                     });
}

Var select(Var x, std::size_t flat_index) {
  Tape& tape = *x.tape;
  const Tensor& xv = tape.value(x);
  if (flat_index >= xv.size()) throw std::invalid_argument("select: index out of range");
  const Var inputs[] = {x};
  return tape.record(Tensor({1}, {xv[flat_index]}), inputs, [x, flat_index](Tape& tp, Var self) {
    tp.grad_in(x)[flat_index] += tp.grad_out(self)[0];
  });
}

Var sum(Var x) {
  Tape& tape = *x.tape;
  const auto xv = tape.value(x).values();
  const Var inputs[] = {x};
  return tape.record(Tensor({1}, {std::accumulate(xv.begin(), xv.end(), 0.0)}), inputs, [x](Tape& tp, Var self) {
    const double g = tp.grad_out(self)[0];
    for (double& v : tp.grad_in(x)) v += g;
  });
}

void Adam::step(std::span<const std::span<double>> params, std::span<const std::span<const double>> grads) {
  if (params.size() != grads.size()) throw std::invalid_argument("Adam: params/grads count mismatch");
  if (m_.empty()) {
    for (const auto& p : params) {
      m_.emplace_back(p.size(), 0.0);
      v_.emplace_back(p.size(), 0.0);
    }
  }
  if (m_.size() != params.size()) throw std::invalid_argument("Adam: parameter set changed between steps");
  ++t_;
  const double bias1 = 1.0 - std::pow(options_.beta1, static_cast<double>(t_));
  const double bias2 = 1.0 - std::pow(options_.beta2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto p = params[k];
    const auto g = grads[k];
    if (p.size() != m_[k].size() || g.size() != p.size()) throw std::invalid_argument("Adam: buffer size changed");
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g[i] + options_.weight_decay * p[i];
      m_[k][i] = options_.beta1 * m_[k][i] + (1.0 - options_.beta1) * gi;
      v_[k][i] = options_.beta2 * v_[k][i] + (1.0 - options_.beta2) * gi * gi;
      const double mhat = m_[k][i] / bias1;
      const double vhat = v_[k][i] / bias2;
      p[i] -= options_.learning_rate * mhat / (std::sqrt(vhat) + options_.epsilon);
    }
  }
}

void Adam::step(std::span<double> params, std::span<const double> grad) {
  const std::span<double> ps[] = {params};
  const std::span<const double> gs[] = {grad};
  step(ps, gs);
}

}  // namespace cfx::ad
