#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "cfx/autodiff.hpp"
#include "cfx/series.hpp"

namespace cfx::nn {

inline constexpr std::array<std::size_t, 3> kBlockChannels = {32, 64, 128};
inline constexpr std::size_t kKernelWidth = 3;
inline constexpr std::size_t kPoolWidth = 2;
inline constexpr double kBatchNormMomentum = 0.1;

/// conv(k=3, same padding) -> batch norm -> ReLU -> max pool(2).
struct Conv1dBlock {
  ad::Tensor kernel;  // out x in x 3
  ad::Tensor bias;    // out
  ad::Tensor gamma;   // out
  ad::Tensor beta;    // out
  std::vector<double> running_mean;
  std::vector<double> running_var;

  std::size_t out_channels() const { return kernel.dim(0); }
  std::size_t in_channels() const { return kernel.dim(1); }
};

enum class Mode { training, inference };

/// Tape handles of one forward pass.
struct Graph {
  ad::Var logits;
  ad::Var probabilities;
  /// Parameter leaves in declaration order (see Classifier::parameters()).
  std::vector<ad::Var> parameters;
  /// Training mode only: batch moments per block, for running-stat updates.
  std::array<ad::BatchMoments, 3> moments;
};

/// The three-block 1-D CNN: blocks of 32, 64 and 128 channels, global average
/// pooling, dropout, a 128 -> c linear head and softmax.
class Classifier {
 public:
  Classifier() = default;

  /// Kaiming-uniform fan-in weights, zero biases, gamma 1, beta 0, seeded.
  /// Throws PreconditionError when T < 8 or fewer than two classes.
  Classifier(std::size_t channels, std::size_t length, std::vector<std::string> labels, double dropout,
             std::uint64_t seed);

  std::size_t channels() const { return channels_; }
  std::size_t length() const { return length_; }
  std::size_t num_classes() const { return labels_.size(); }
  const std::vector<std::string>& labels() const { return labels_; }
  double dropout() const { return dropout_; }

  std::array<Conv1dBlock, 3>& blocks() { return blocks_; }
  const std::array<Conv1dBlock, 3>& blocks() const { return blocks_; }
  ad::Tensor& head_weight() { return head_weight_; }
  const ad::Tensor& head_weight() const { return head_weight_; }
  ad::Tensor& head_bias() { return head_bias_; }
  const ad::Tensor& head_bias() const { return head_bias_; }

  /// Trainable tensors in file/optimizer order: per block kernel, bias, gamma,
  /// beta; then head weight and head bias.
  std::vector<ad::Tensor*> parameters();
  std::vector<const ad::Tensor*> parameters() const;

  /// Records a forward pass of `input` (B x d x T) on its tape. In training
  /// mode batch norm uses batch moments and dropout draws from `rng`;
  /// inference mode is deterministic and never touches `rng`.
  Graph build(ad::Var input, Mode mode, bool parameters_require_grad, std::mt19937_64* rng = nullptr) const;

  /// Inference-mode probabilities, B x c, for a B x d x T batch.
  ad::Tensor forward(const ad::Tensor& batch) const;

  std::vector<double> predict_proba(const TimeSeries& series) const;
  std::size_t predict(const TimeSeries& series) const;

  /// Throws PreconditionError naming expected and found (T, d).
  void check_input(std::size_t length, std::size_t channels) const;

  /// Exponential running-stat update from one training batch.
  void update_running_stats(const std::array<ad::BatchMoments, 3>& moments);

  friend bool operator==(const Classifier&, const Classifier&);

 private:
  std::size_t channels_ = 0;
  std::size_t length_ = 0;
  std::vector<std::string> labels_;
  double dropout_ = 0.0;
  std::array<Conv1dBlock, 3> blocks_;
  ad::Tensor head_weight_;
  ad::Tensor head_bias_;
};

/// Packs series into a B x d x T tensor.
ad::Tensor to_batch(std::span<const TimeSeries> series);
ad::Tensor to_batch(const TimeSeries& series);

struct TrainConfig {
  std::size_t max_epochs = 80;
  std::size_t patience = 10;
  double learning_rate = 1e-3;
  double weight_decay = 1e-4;
  double dropout = 0.2;
  std::size_t batch_size = 32;
  double validation_fraction = 0.2;
  std::uint64_t seed = 0;
};

struct TrainReport {
  double train_accuracy = 0.0;
  double validation_accuracy = 0.0;
  double test_accuracy = 0.0;
  double best_validation_loss = 0.0;
  std::size_t epochs_run = 0;
  std::size_t best_epoch = 0;
  bool early_stopped = false;
  std::vector<double> train_loss;       // per epoch
  std::vector<double> validation_loss;  // per epoch
};

struct TrainResult {
  Classifier classifier;
  TrainReport report;
};

/// Adam on mean cross-entropy with a seeded hold-out split for early stopping.
/// The best-validation parameters and running statistics are restored.
/// Throws PreconditionError for single-class or too-small train splits.
TrainResult train(const Dataset& dataset, const TrainConfig& config);

double accuracy(const Classifier& classifier, std::span<const LabeledSeries> samples);

inline constexpr std::uint32_t kModelFormatVersion = 1;

void save_model(const Classifier& classifier, std::ostream& out);
void save_model(const Classifier& classifier, const std::filesystem::path& path);
/// Throws IoError on a bad magic, version mismatch, truncated file or an
/// inconsistent shape manifest.
Classifier load_model(std::istream& in);
Classifier load_model(const std::filesystem::path& path);

}  // namespace cfx::nn
