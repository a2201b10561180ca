#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "cfx/series.hpp"

namespace cfx::warp {

/// Squared-Euclidean pairwise costs, row-major rows x cols.
struct CostMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> entries;

  double operator()(std::size_t i, std::size_t j) const { return entries[i * cols + j]; }
};

/// Zero-based (i, j) index pairs from (0, 0) to (m-1, m'-1).
using AlignmentPath = std::vector<std::pair<std::size_t, std::size_t>>;

/// Sentinel standing in for +inf on the soft-DTW boundary.
inline constexpr double kBoundary = 1e30;

/// Entry (i, j) = sum over channels of (x[i] - y[j])^2. Throws PreconditionError on a channel mismatch.
CostMatrix cost_matrix(const TimeSeries& x, const TimeSeries& y);

struct DtwResult {
  double distance = 0.0;
  AlignmentPath path;
};

/// Exact DTW by dynamic programming. Traceback prefers diagonal, then
/// vertical (i-1), then horizontal (j-1) on ties.
DtwResult dtw(const TimeSeries& x, const TimeSeries& y);

/// Distance only, O(m') memory.
double dtw_distance(const TimeSeries& x, const TimeSeries& y);

/// -gamma * log(sum exp(-a_i / gamma)), shifted by min a_i for stability.
/// Throws std::invalid_argument on an empty list or gamma <= 0.
double soft_min(std::span<const double> values, double gamma);

/// Forward table kept for the backward pass. r has (m+2) x (m'+2) entries
/// indexed from 0; cell (i, j), 1 <= i <= m, holds the soft-DTW value of the
/// prefixes x[0..i), y[0..j).
struct SoftDtwWorkspace {
  std::size_t rows = 0;
  std::size_t cols = 0;
  double gamma = 1.0;
  CostMatrix cost;
  std::vector<double> r;
  /// Filled by soft_dtw_grad: expected alignment matrix, rows x cols.
  std::vector<double> e;

  double& R(std::size_t i, std::size_t j) { return r[i * (cols + 2) + j]; }
  double R(std::size_t i, std::size_t j) const { return r[i * (cols + 2) + j]; }
};

struct SoftDtwResult {
  double value = 0.0;
  SoftDtwWorkspace workspace;
};

/// Soft-DTW value via r(i,j) = delta(i,j) + softmin_gamma(r(i-1,j-1), r(i-1,j), r(i,j-1)).
SoftDtwResult soft_dtw(const TimeSeries& x, const TimeSeries& y, double gamma);

/// Gradient of soft_dtw(x, y, gamma) with respect to x (m x d, same layout as x).
/// Throws PreconditionError when the workspace does not belong to (x, y).
TimeSeries soft_dtw_grad(SoftDtwWorkspace& workspace, const TimeSeries& x, const TimeSeries& y);

/// Every monotone path from (0,0) to (m-1, m'-1). Throws std::invalid_argument beyond 8 x 8.
std::vector<AlignmentPath> brute_force_paths(std::size_t m, std::size_t m_prime);

/// Number of alignment paths for an m x m' grid (Delannoy number D(m-1, m'-1)).
double delannoy(std::size_t m, std::size_t m_prime);

double path_cost(const CostMatrix& cost, const AlignmentPath& path);

}  // namespace cfx::warp
