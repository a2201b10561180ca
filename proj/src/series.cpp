#include "cfx/series.hpp"

#include <cmath>
#include <set>
#include <stdexcept>

#include "cfx/error.hpp"

namespace cfx {

TimeSeries::TimeSeries(std::size_t length, std::size_t channels)
    : TimeSeries(length, channels, std::vector<double>(length * channels, 0.0)) {}

TimeSeries::TimeSeries(std::size_t length, std::size_t channels, std::vector<double> values)
    : length_(length), channels_(channels), values_(std::move(values)) {
  if (length == 0 || channels == 0) throw std::invalid_argument("time series needs T >= 1 and d >= 1");
  if (values_.size() != length * channels) {
    throw std::invalid_argument("time series expects " + std::to_string(length * channels) +
                                " values, got " + std::to_string(values_.size()));
  }
  for (double v : values_) {
    if (!std::isfinite(v)) throw std::invalid_argument("time series contains a non-finite value");
  }
}

ClassLabel Dataset::label(std::size_t index) const {
  if (index >= labels.size()) throw PreconditionError("label index " + std::to_string(index) + " out of range");
  return ClassLabel{index, labels[index]};
}

std::size_t Dataset::label_index(const std::string& label_name) const {
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == label_name) return i;
  }
  throw PreconditionError("unknown class label '" + label_name + "'");
}

void validate(const Dataset& dataset) {
  if (dataset.train.size() < 2) throw PreconditionError("dataset needs at least two train samples");
  const std::set<std::string> names(dataset.labels.begin(), dataset.labels.end());
  if (names.size() != dataset.labels.size()) throw PreconditionError("duplicate class label names");

  const std::size_t T = dataset.length();
  const std::size_t d = dataset.channels();
  std::set<std::size_t> seen;
  auto check = [&](const std::vector<LabeledSeries>& split, const char* split_name) {
    for (std::size_t i = 0; i < split.size(); ++i) {
      const auto& s = split[i];
      if (s.series.length() != T || s.series.channels() != d) {
        throw PreconditionError(std::string(split_name) + " sample " + std::to_string(i) + " has shape (" +
                                std::to_string(s.series.length()) + ", " + std::to_string(s.series.channels()) +
                                "), expected (" + std::to_string(T) + ", " + std::to_string(d) + ")");
      }
      if (s.label >= dataset.labels.size()) {
        throw PreconditionError(std::string(split_name) + " sample " + std::to_string(i) +
                                " has a label outside the vocabulary");
      }
    }
  };
  check(dataset.train, "train");
  check(dataset.test, "test");
  for (const auto& s : dataset.train) seen.insert(s.label);
  if (seen.size() < 2) throw PreconditionError("train split contains a single class");
}

NormStats compute_stats(const std::vector<LabeledSeries>& samples) {
  if (samples.empty()) throw PreconditionError("empty dataset");
  const std::size_t d = samples.front().series.channels();
  NormStats stats{std::vector<double>(d, 0.0), std::vector<double>(d, 0.0)};
  std::size_t count = 0;
  for (const auto& s : samples) {
    for (std::size_t t = 0; t < s.series.length(); ++t) {
      for (std::size_t ch = 0; ch < d; ++ch) stats.mean[ch] += s.series(t, ch);
    }
    count += s.series.length();
  }
  for (double& m : stats.mean) m /= static_cast<double>(count);
  for (const auto& s : samples) {
    for (std::size_t t = 0; t < s.series.length(); ++t) {
      for (std::size_t ch = 0; ch < d; ++ch) {
        const double diff = s.series(t, ch) - stats.mean[ch];
        stats.stddev[ch] += diff * diff;
      }
    }
  }
  for (double& v : stats.stddev) v = std::sqrt(v / static_cast<double>(count));
  return stats;
}

TimeSeries apply_stats(const TimeSeries& series, const NormStats& stats) {
  if (stats.mean.size() != series.channels() || stats.stddev.size() != series.channels()) {
    throw PreconditionError("normalization stats have " + std::to_string(stats.mean.size()) +
                            " channels, series has " + std::to_string(series.channels()));
  }
  TimeSeries out = series;
  for (std::size_t t = 0; t < out.length(); ++t) {
    for (std::size_t ch = 0; ch < out.channels(); ++ch) {
      const double centred = series(t, ch) - stats.mean[ch];
      out(t, ch) = stats.stddev[ch] < kDegenerateStddev ? centred : centred / stats.stddev[ch];
    }
  }
  return out;
}

Dataset z_normalize(const Dataset& dataset) {
  if (dataset.train.empty()) throw PreconditionError("empty dataset");
  Dataset out = dataset;
  out.stats = compute_stats(dataset.train);
  for (auto& s : out.train) s.series = apply_stats(s.series, out.stats);
  for (auto& s : out.test) s.series = apply_stats(s.series, out.stats);
  return out;
}

TimeSeries denormalize(const TimeSeries& series, const NormStats& stats) {
  if (stats.mean.size() != series.channels() || stats.stddev.size() != series.channels()) {
    throw PreconditionError("normalization stats have " + std::to_string(stats.mean.size()) +
                            " channels, series has " + std::to_string(series.channels()));
  }
  TimeSeries out = series;
  for (std::size_t t = 0; t < out.length(); ++t) {
    for (std::size_t ch = 0; ch < out.channels(); ++ch) {
      const double scale = stats.stddev[ch] < kDegenerateStddev ? 1.0 : stats.stddev[ch];
      out(t, ch) = series(t, ch) * scale + stats.mean[ch];
    }
  }
  return out;
}

}  // namespace cfx
