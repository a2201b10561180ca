#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <string>

#include "cfx/series.hpp"

namespace cfx::test {

inline TimeSeries random_series(std::mt19937_64& rng, std::size_t length, std::size_t channels, double scale = 1.0) {
  std::normal_distribution<double> noise(0.0, scale);
  std::vector<double> values(length * channels);
  for (auto& v : values) v = noise(rng);
  return TimeSeries(length, channels, std::move(values));
}

/// |a - b| relative to the larger magnitude, with a 1e-6 floor for near-zero entries.
inline double rel_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
}

/// Central difference of f() in the coordinate `x` (restored afterwards).
template <typename F>
double central_difference(F&& f, double& x, double h) {
  const double saved = x;
  x = saved + h;
  const double plus = f();
  x = saved - h;
  const double minus = f();
  x = saved;
  return (plus - minus) / (2.0 * h);
}

inline std::filesystem::path fixture(const std::string& name) {
  return std::filesystem::path(CFX_FIXTURE_DIR) / name;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("cfx-" + tag + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace cfx::test
