#include "cfx/classifier.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <set>

#include "cfx/error.hpp"
#include "cfx/seed.hpp"

namespace cfx::nn {
namespace {

ad::Tensor kaiming_uniform(std::vector<std::size_t> shape, std::size_t fan_in, std::mt19937_64& rng) {
  ad::Tensor t(std::move(shape));
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& v : t.values()) v = dist(rng);
  return t;
}

std::string shape_pair(std::size_t length, std::size_t channels) {
  return "(T=" + std::to_string(length) + ", d=" + std::to_string(channels) + ")";
}

}  // namespace

Classifier::Classifier(std::size_t channels, std::size_t length, std::vector<std::string> labels, double dropout,
                       std::uint64_t seed)
    : channels_(channels), length_(length), labels_(std::move(labels)), dropout_(dropout) {
  if (channels == 0) throw PreconditionError("classifier needs at least one input channel");
  if (length < 8) {
    throw PreconditionError("series length " + std::to_string(length) +
                            " is too short: three pooling stages need T >= 8");
  }
  if (labels_.size() < 2) throw PreconditionError("classifier needs at least two classes");
  if (dropout < 0.0 || dropout >= 1.0) throw std::invalid_argument("dropout must lie in [0, 1)");

  std::mt19937_64 rng(seed);
  std::size_t in = channels;
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    const std::size_t out = kBlockChannels[b];
    Conv1dBlock& blk = blocks_[b];
    blk.kernel = kaiming_uniform({out, in, kKernelWidth}, in * kKernelWidth, rng);
    blk.bias = ad::Tensor({out}, 0.0);
    blk.gamma = ad::Tensor({out}, 1.0);
    blk.beta = ad::Tensor({out}, 0.0);
    blk.running_mean.assign(out, 0.0);
    blk.running_var.assign(out, 1.0);
    in = out;
  }
  head_weight_ = kaiming_uniform({labels_.size(), in}, in, rng);
  head_bias_ = ad::Tensor({labels_.size()}, 0.0);
}

std::vector<ad::Tensor*> Classifier::parameters() {
  std::vector<ad::Tensor*> out;
  for (auto& b : blocks_) out.insert(out.end(), {&b.kernel, &b.bias, &b.gamma, &b.beta});
  out.push_back(&head_weight_);
  out.push_back(&head_bias_);
  return out;
}

std::vector<const ad::Tensor*> Classifier::parameters() const {
  std::vector<const ad::Tensor*> out;
  for (const auto& b : blocks_) out.insert(out.end(), {&b.kernel, &b.bias, &b.gamma, &b.beta});
  out.push_back(&head_weight_);
  out.push_back(&head_bias_);
  return out;
}

void Classifier::check_input(std::size_t length, std::size_t channels) const {
  if (length != length_ || channels != channels_) {
    throw PreconditionError("input shape " + shape_pair(length, channels) + " does not match the model's " +
                            shape_pair(length_, channels_));
  }
}

Graph Classifier::build(ad::Var input, Mode mode, bool parameters_require_grad, std::mt19937_64* rng) const {
  ad::Tape& tape = *input.tape;
  const ad::Tensor& x = tape.value(input);
  if (x.rank() != 3) throw PreconditionError("classifier input must be B x d x T");
  check_input(x.dim(2), x.dim(1));
  if (mode == Mode::training && dropout_ > 0.0 && rng == nullptr) {
    throw std::invalid_argument("training-mode forward with dropout needs an rng");
  }

  Graph g;
  for (const ad::Tensor* p : parameters()) g.parameters.push_back(tape.leaf(*p, parameters_require_grad));

  ad::Var h = input;
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    const ad::Var kernel = g.parameters[4 * b];
    const ad::Var bias = g.parameters[4 * b + 1];
    const ad::Var gamma = g.parameters[4 * b + 2];
    const ad::Var beta = g.parameters[4 * b + 3];
    h = ad::conv1d(h, kernel, bias);
    h = mode == Mode::training ? ad::batch_norm_train(h, gamma, beta, &g.moments[b])
                               : ad::batch_norm_infer(h, gamma, beta, blocks_[b].running_mean, blocks_[b].running_var);
    h = ad::relu(h);
    h = ad::max_pool1d(h, kPoolWidth);
  }
  h = ad::global_avg_pool(h);
  if (mode == Mode::training && dropout_ > 0.0) h = ad::dropout(h, dropout_, *rng);
  g.logits = ad::linear(h, g.parameters[12], g.parameters[13]);
  g.probabilities = ad::softmax(g.logits);
  return g;
}

ad::Tensor Classifier::forward(const ad::Tensor& batch) const {
  ad::Tape tape;
  const ad::Var input = tape.constant(batch);
  const Graph g = build(input, Mode::inference, false);
  return tape.value(g.probabilities);
}

std::vector<double> Classifier::predict_proba(const TimeSeries& series) const {
  const ad::Tensor probs = forward(to_batch(series));
  return {probs.values().begin(), probs.values().end()};
}

std::size_t Classifier::predict(const TimeSeries& series) const {
  const auto p = predict_proba(series);
  return static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
}

void Classifier::update_running_stats(const std::array<ad::BatchMoments, 3>& moments) {
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    const auto& m = moments[b];
    const double n = static_cast<double>(m.count);
    const double unbias = m.count > 1 ? n / (n - 1.0) : 1.0;
    for (std::size_t c = 0; c < m.mean.size(); ++c) {
      blocks_[b].running_mean[c] = (1.0 - kBatchNormMomentum) * blocks_[b].running_mean[c] + kBatchNormMomentum * m.mean[c];
      blocks_[b].running_var[c] =
          (1.0 - kBatchNormMomentum) * blocks_[b].running_var[c] + kBatchNormMomentum * m.variance[c] * unbias;
    }
  }
}

bool operator==(const Classifier& a, const Classifier& b) {
  if (a.channels_ != b.channels_ || a.length_ != b.length_ || a.labels_ != b.labels_ || a.dropout_ != b.dropout_) {
    return false;
  }
  for (std::size_t i = 0; i < a.blocks_.size(); ++i) {
    const auto& x = a.blocks_[i];
    const auto& y = b.blocks_[i];
    if (!(x.kernel == y.kernel && x.bias == y.bias && x.gamma == y.gamma && x.beta == y.beta &&
          x.running_mean == y.running_mean && x.running_var == y.running_var)) {
      return false;
    }
  }
  return a.head_weight_ == b.head_weight_ && a.head_bias_ == b.head_bias_;
}

ad::Tensor to_batch(std::span<const TimeSeries> series) {
  if (series.empty()) throw std::invalid_argument("to_batch: empty batch");
  const std::size_t T = series.front().length();
  const std::size_t d = series.front().channels();
  ad::Tensor out({series.size(), d, T});
  for (std::size_t b = 0; b < series.size(); ++b) {
    if (!series[b].same_shape(series.front())) throw PreconditionError("to_batch: series shapes differ");
    for (std::size_t ch = 0; ch < d; ++ch) {
      for (std::size_t t = 0; t < T; ++t) out[(b * d + ch) * T + t] = series[b](t, ch);
    }
  }
  return out;
}

ad::Tensor to_batch(const TimeSeries& series) { return to_batch(std::span<const TimeSeries>(&series, 1)); }

double accuracy(const Classifier& classifier, std::span<const LabeledSeries> samples) {
  if (samples.empty()) return 0.0;
  constexpr std::size_t kChunk = 256;
  std::size_t correct = 0;
  for (std::size_t start = 0; start < samples.size(); start += kChunk) {
    const std::size_t end = std::min(samples.size(), start + kChunk);
    std::vector<TimeSeries> chunk;
    for (std::size_t i = start; i < end; ++i) chunk.push_back(samples[i].series);
    const ad::Tensor probs = classifier.forward(to_batch(chunk));
    const std::size_t c = classifier.num_classes();
    for (std::size_t i = start; i < end; ++i) {
      const auto row = probs.values().subspan((i - start) * c, c);
      const auto pred = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
      if (pred == samples[i].label) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(samples.size());
}

namespace {

double mean_cross_entropy(const Classifier& classifier, const std::vector<LabeledSeries>& samples) {
  double total = 0.0;
  const std::size_t c = classifier.num_classes();
  constexpr std::size_t kChunk = 256;
  for (std::size_t start = 0; start < samples.size(); start += kChunk) {
    const std::size_t end = std::min(samples.size(), start + kChunk);
    std::vector<TimeSeries> chunk;
    for (std::size_t i = start; i < end; ++i) chunk.push_back(samples[i].series);
    ad::Tape tape;
    const Graph g = classifier.build(tape.constant(to_batch(chunk)), Mode::inference, false);
    const auto logits = tape.value(g.logits).values();
    for (std::size_t i = start; i < end; ++i) {
      const auto row = logits.subspan((i - start) * c, c);
      const double peak = *std::max_element(row.begin(), row.end());
      double z = 0.0;
      for (double v : row) z += std::exp(v - peak);
      total += std::log(z) + peak - row[samples[i].label];
    }
  }
  return total / static_cast<double>(samples.size());
}

}  // namespace

TrainResult train(const Dataset& dataset, const TrainConfig& config) {
  if (config.max_epochs < 1) throw std::invalid_argument("max epochs must be at least 1");
  if (config.patience < 1) throw std::invalid_argument("patience must be at least 1");
  if (config.batch_size < 1) throw std::invalid_argument("batch size must be at least 1");
  if (dataset.train.size() < 2) throw PreconditionError("train split needs at least two samples");
  std::set<std::size_t> classes;
  for (const auto& s : dataset.train) {
    if (s.label >= dataset.labels.size()) throw PreconditionError("train label outside the vocabulary");
    classes.insert(s.label);
  }
  if (classes.size() < 2) throw PreconditionError("train split contains a single class");

  const std::size_t n = dataset.train.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 split_rng(derive_seed(config.seed, "train/split"));
  std::shuffle(order.begin(), order.end(), split_rng);
  const auto n_val = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(config.validation_fraction * static_cast<double>(n))), 1, n - 1);
  std::vector<LabeledSeries> validation, fit;
  for (std::size_t i = 0; i < n; ++i) (i < n_val ? validation : fit).push_back(dataset.train[order[i]]);

  Classifier model(dataset.channels(), dataset.length(), dataset.labels, config.dropout,
                   derive_seed(config.seed, "train/init"));
  ad::Adam adam({.learning_rate = config.learning_rate, .weight_decay = config.weight_decay});
  std::mt19937_64 shuffle_rng(derive_seed(config.seed, "train/shuffle"));
  std::mt19937_64 dropout_rng(derive_seed(config.seed, "train/dropout"));

  TrainReport report;
  Classifier best = model;
  double best_loss = std::numeric_limits<double>::infinity();
  std::size_t waited = 0;
  std::vector<std::size_t> batch_order(fit.size());
  std::iota(batch_order.begin(), batch_order.end(), 0);

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::shuffle(batch_order.begin(), batch_order.end(), shuffle_rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < fit.size(); start += config.batch_size) {
      const std::size_t end = std::min(fit.size(), start + config.batch_size);
      std::vector<TimeSeries> xs;
      std::vector<std::size_t> ys;
      for (std::size_t i = start; i < end; ++i) {
        xs.push_back(fit[batch_order[i]].series);
        ys.push_back(fit[batch_order[i]].label);
      }
      ad::Tape tape;
      const Graph g = model.build(tape.constant(to_batch(xs)), Mode::training, true, &dropout_rng);
      const ad::Var loss = ad::softmax_cross_entropy(g.logits, ys);
      tape.backward(loss);
      epoch_loss += tape.value(loss)[0] * static_cast<double>(end - start);

      std::vector<std::span<double>> params;
      std::vector<std::span<const double>> grads;
      const auto tensors = model.parameters();
      for (std::size_t k = 0; k < tensors.size(); ++k) {
        params.push_back(tensors[k]->values());
        grads.push_back(tape.grad(g.parameters[k]));
      }
      adam.step(params, grads);
      model.update_running_stats(g.moments);
    }
    report.train_loss.push_back(epoch_loss / static_cast<double>(fit.size()));
    const double val_loss = mean_cross_entropy(model, validation);
    report.validation_loss.push_back(val_loss);
    report.epochs_run = epoch;
    if (val_loss < best_loss) {
      best_loss = val_loss;
      best = model;
      report.best_epoch = epoch;
      waited = 0;
    } else if (++waited >= config.patience) {
      report.early_stopped = true;
      break;
    }
  }

  report.best_validation_loss = best_loss;
  report.train_accuracy = accuracy(best, fit);
  report.validation_accuracy = accuracy(best, validation);
  report.test_accuracy = accuracy(best, dataset.test);
  return TrainResult{std::move(best), std::move(report)};
}

// ---- model file -------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'C', 'F', 'X', 'M'};

void put_u32(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
  out.write(b, 4);
}

void put_f64(std::ostream& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xffu);
  out.write(b, 8);
}

void read_exact(std::istream& in, char* dst, std::size_t n) {
  in.read(dst, static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) throw IoError("truncated model file");
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  read_exact(in, reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

double get_f64(std::istream& in) {
  unsigned char b[8];
  read_exact(in, reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(v);
}

/// Every stored block, in file order, as (shape, values) views.
struct Block {
  std::vector<std::size_t> shape;
  std::span<double> values;
};

std::vector<Block> file_blocks(Classifier& c) {
  std::vector<Block> out;
  for (auto& b : c.blocks()) {
    out.push_back({b.kernel.shape(), b.kernel.values()});
    out.push_back({b.bias.shape(), b.bias.values()});
    out.push_back({b.gamma.shape(), b.gamma.values()});
    out.push_back({b.beta.shape(), b.beta.values()});
    out.push_back({{b.running_mean.size()}, b.running_mean});
    out.push_back({{b.running_var.size()}, b.running_var});
  }
  out.push_back({c.head_weight().shape(), c.head_weight().values()});
  out.push_back({c.head_bias().shape(), c.head_bias().values()});
  return out;
}

}  // namespace

void save_model(const Classifier& classifier, std::ostream& out) {
  Classifier copy = classifier;
  const auto blocks = file_blocks(copy);
  out.write(kMagic, 4);
  put_u32(out, kModelFormatVersion);
  put_u32(out, static_cast<std::uint32_t>(classifier.channels()));
  put_u32(out, static_cast<std::uint32_t>(classifier.length()));
  put_u32(out, static_cast<std::uint32_t>(classifier.num_classes()));
  put_f64(out, classifier.dropout());
  for (const auto& label : classifier.labels()) {
    put_u32(out, static_cast<std::uint32_t>(label.size()));
    out.write(label.data(), static_cast<std::streamsize>(label.size()));
  }
  put_u32(out, static_cast<std::uint32_t>(blocks.size()));
  for (const auto& b : blocks) {
    put_u32(out, static_cast<std::uint32_t>(b.shape.size()));
    for (auto dim : b.shape) put_u32(out, static_cast<std::uint32_t>(dim));
  }
  for (const auto& b : blocks) {
    for (double v : b.values) put_f64(out, v);
  }
  if (!out) throw IoError("failed to write model");
}

void save_model(const Classifier& classifier, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  save_model(classifier, out);
  out.close();
  if (!out) throw IoError("failed to write model " + path.string());
}

Classifier load_model(std::istream& in) {
  char magic[4];
  read_exact(in, magic, 4);
  if (!std::equal(magic, magic + 4, kMagic)) throw IoError("not a model file (bad magic)");
  const std::uint32_t version = get_u32(in);
  if (version != kModelFormatVersion) {
    throw IoError("unsupported model file version " + std::to_string(version) + " (this build reads version " +
                  std::to_string(kModelFormatVersion) + ")");
  }
  const std::uint32_t channels = get_u32(in);
  const std::uint32_t length = get_u32(in);
  const std::uint32_t classes = get_u32(in);
  const double dropout = get_f64(in);
  if (classes < 2 || classes > 1u << 20) throw IoError("inconsistent shape manifest: class count " + std::to_string(classes));
  std::vector<std::string> labels;
  for (std::uint32_t i = 0; i < classes; ++i) {
    const std::uint32_t len = get_u32(in);
    if (len > 1u << 16) throw IoError("inconsistent shape manifest: label length " + std::to_string(len));
    std::string label(len, '\0');
    read_exact(in, label.data(), len);
    labels.push_back(std::move(label));
  }

  Classifier model;
  try {
    model = Classifier(channels, length, labels, dropout, 0);
  } catch (const std::exception& e) {
    throw IoError(std::string("inconsistent shape manifest: ") + e.what());
  }
  auto blocks = file_blocks(model);
  const std::uint32_t count = get_u32(in);
  if (count != blocks.size()) {
    throw IoError("inconsistent shape manifest: " + std::to_string(count) + " blocks, expected " +
                  std::to_string(blocks.size()));
  }
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    const std::uint32_t rank = get_u32(in);
    if (rank > 8) throw IoError("inconsistent shape manifest: block " + std::to_string(k) + " has rank " + std::to_string(rank));
    std::vector<std::size_t> shape(rank);
    for (auto& dim : shape) dim = get_u32(in);
    if (shape != blocks[k].shape) throw IoError("inconsistent shape manifest at block " + std::to_string(k));
  }
  for (auto& b : blocks) {
    for (double& v : b.values) v = get_f64(in);
  }
  for (const auto& blk : model.blocks()) {
    for (double v : blk.running_var) {
      if (!(v >= 0.0)) throw IoError("model file holds a negative running variance");
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) throw IoError("trailing bytes after model data");
  return model;
}

Classifier load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open model file " + path.string());
  try {
    return load_model(in);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

}  // namespace cfx::nn
