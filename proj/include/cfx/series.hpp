#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace cfx {

/// A d-channel, T-step real-valued sequence. Storage is timestep-major:
/// value (t, ch) lives at t * channels + ch.
class TimeSeries {
 public:
  TimeSeries() = default;

  /// Zero-filled series. Throws std::invalid_argument when length or channels is 0.
  TimeSeries(std::size_t length, std::size_t channels);

  /// Throws std::invalid_argument on a size mismatch or a non-finite value.
  TimeSeries(std::size_t length, std::size_t channels, std::vector<double> values);

  std::size_t length() const { return length_; }
  std::size_t channels() const { return channels_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  double operator()(std::size_t t, std::size_t ch) const { return values_[t * channels_ + ch]; }
  double& operator()(std::size_t t, std::size_t ch) { return values_[t * channels_ + ch]; }

  /// Flattened (timestep-major) view.
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

  /// Row of d values at timestep t.
  std::span<const double> at(std::size_t t) const {
    return std::span<const double>(values_).subspan(t * channels_, channels_);
  }

  bool same_shape(const TimeSeries& other) const {
    return length_ == other.length_ && channels_ == other.channels_;
  }

  friend bool operator==(const TimeSeries&, const TimeSeries&) = default;

 private:
  std::size_t length_ = 0;
  std::size_t channels_ = 0;
  std::vector<double> values_;
};

/// A class index into a label vocabulary together with its display name.
struct ClassLabel {
  std::size_t index = 0;
  std::string name;

  friend bool operator==(const ClassLabel&, const ClassLabel&) = default;
};

struct LabeledSeries {
  TimeSeries series;
  std::size_t label = 0;

  friend bool operator==(const LabeledSeries&, const LabeledSeries&) = default;
};

/// Per-channel mean and standard deviation taken from the train split.
struct NormStats {
  std::vector<double> mean;
  std::vector<double> stddev;

  friend bool operator==(const NormStats&, const NormStats&) = default;
};

/// Channels whose train standard deviation falls below this are only centred.
inline constexpr double kDegenerateStddev = 1e-12;

struct Dataset {
  std::string name;
  std::vector<LabeledSeries> train;
  std::vector<LabeledSeries> test;
  /// Dense vocabulary: label index i has display name labels[i].
  std::vector<std::string> labels;
  /// Present once z_normalize has been applied.
  NormStats stats;

  std::size_t length() const { return train.empty() ? 0 : train.front().series.length(); }
  std::size_t channels() const { return train.empty() ? 0 : train.front().series.channels(); }
  std::size_t num_classes() const { return labels.size(); }
  bool normalized() const { return !stats.mean.empty(); }

  ClassLabel label(std::size_t index) const;
  /// Index of a display name; throws PreconditionError when unknown.
  std::size_t label_index(const std::string& name) const;
};

/// Checks the dataset invariants: equal (T, d) everywhere, at least two train
/// samples spanning at least two labels, label indices inside the vocabulary
/// and unique display names. Throws PreconditionError.
void validate(const Dataset& dataset);

/// Per-channel statistics of the train split (population standard deviation).
NormStats compute_stats(const std::vector<LabeledSeries>& samples);

TimeSeries apply_stats(const TimeSeries& series, const NormStats& stats);

/// Z-normalizes both splits with train-split statistics; the statistics are
/// stored on the returned dataset. Throws PreconditionError("empty dataset").
Dataset z_normalize(const Dataset& dataset);

/// Inverse of z_normalize. Throws PreconditionError on a channel-count mismatch.
TimeSeries denormalize(const TimeSeries& series, const NormStats& stats);

}  // namespace cfx
