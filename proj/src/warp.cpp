#include "cfx/warp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "cfx/error.hpp"

namespace cfx::warp {
namespace {

void check_pair(const TimeSeries& x, const TimeSeries& y) {
  if (x.empty() || y.empty()) throw PreconditionError("DTW needs non-empty series");
  if (x.channels() != y.channels()) {
    throw PreconditionError("channel mismatch: " + std::to_string(x.channels()) + " vs " +
                            std::to_string(y.channels()));
  }
}

// Three-way soft minimum without allocation; same arithmetic as soft_min().
inline double soft_min3(double a, double b, double c, double gamma) {
  const double lo = std::min({a, b, c});
  const double s = std::exp(-(a - lo) / gamma) + std::exp(-(b - lo) / gamma) + std::exp(-(c - lo) / gamma);
  return lo - gamma * std::log(s);
}

}  // namespace

CostMatrix cost_matrix(const TimeSeries& x, const TimeSeries& y) {
  check_pair(x, y);
  CostMatrix c{x.length(), y.length(), std::vector<double>(x.length() * y.length())};
  const std::size_t d = x.channels();
  for (std::size_t i = 0; i < c.rows; ++i) {
    const auto xi = x.at(i);
    for (std::size_t j = 0; j < c.cols; ++j) {
      const auto yj = y.at(j);
      double acc = 0.0;
      for (std::size_t ch = 0; ch < d; ++ch) acc += (xi[ch] - yj[ch]) * (xi[ch] - yj[ch]);
      c.entries[i * c.cols + j] = acc;
    }
  }
  return c;
}

DtwResult dtw(const TimeSeries& x, const TimeSeries& y) {
  const CostMatrix c = cost_matrix(x, y);
  const std::size_t m = c.rows, n = c.cols;
  constexpr double inf = std::numeric_limits<double>::infinity();
  // D has a one-cell border: D(0,0) = 0, other border cells +inf.
  std::vector<double> D((m + 1) * (n + 1), inf);
  const auto at = [n](std::size_t i, std::size_t j) { return i * (n + 1) + j; };
  D[at(0, 0)] = 0.0;
  for (std::size_t i = 1; i <= m; ++i) {
    for (std::size_t j = 1; j <= n; ++j) {
      D[at(i, j)] = c(i - 1, j - 1) + std::min({D[at(i - 1, j - 1)], D[at(i - 1, j)], D[at(i, j - 1)]});
    }
  }

  DtwResult result{D[at(m, n)], {}};
  std::size_t i = m, j = n;
  result.path.emplace_back(i - 1, j - 1);
  while (i > 1 || j > 1) {
    const double diag = D[at(i - 1, j - 1)];
    const double up = D[at(i - 1, j)];
    const double left = D[at(i, j - 1)];
    if (diag <= up && diag <= left) {
      --i;
      --j;
    } else if (up <= left) {
      --i;
    } else {
      --j;
    }
    result.path.emplace_back(i - 1, j - 1);
  }
  std::reverse(result.path.begin(), result.path.end());
  return result;
}

double dtw_distance(const TimeSeries& x, const TimeSeries& y) {
  check_pair(x, y);
  const std::size_t m = x.length(), n = y.length(), d = x.channels();
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> prev(n + 1, inf), cur(n + 1, inf);
  prev[0] = 0.0;
  for (std::size_t i = 1; i <= m; ++i) {
    cur[0] = inf;
    const auto xi = x.at(i - 1);
    for (std::size_t j = 1; j <= n; ++j) {
      const auto yj = y.at(j - 1);
      double cost = 0.0;
      for (std::size_t ch = 0; ch < d; ++ch) cost += (xi[ch] - yj[ch]) * (xi[ch] - yj[ch]);
      cur[j] = cost + std::min({prev[j - 1], prev[j], cur[j - 1]});
    }
    std::swap(prev, cur);
  }
  return prev[n];
}

double soft_min(std::span<const double> values, double gamma) {
  if (values.empty()) throw std::invalid_argument("soft_min of an empty list");
  if (!(gamma > 0.0)) throw std::invalid_argument("soft_min needs gamma > 0");
  const double lo = *std::min_element(values.begin(), values.end());
  double s = 0.0;
  for (double v : values) s += std::exp(-(v - lo) / gamma);
  return lo - gamma * std::log(s);
}

SoftDtwResult soft_dtw(const TimeSeries& x, const TimeSeries& y, double gamma) {
  if (!(gamma > 0.0)) throw std::invalid_argument("soft-DTW needs gamma > 0");
  SoftDtwResult out;
  SoftDtwWorkspace& ws = out.workspace;
  ws.cost = cost_matrix(x, y);
  ws.rows = x.length();
  ws.cols = y.length();
  ws.gamma = gamma;
  ws.r.assign((ws.rows + 2) * (ws.cols + 2), kBoundary);
  ws.R(0, 0) = 0.0;
  for (std::size_t i = 1; i <= ws.rows; ++i) {
    for (std::size_t j = 1; j <= ws.cols; ++j) {
      ws.R(i, j) = ws.cost(i - 1, j - 1) + soft_min3(ws.R(i - 1, j - 1), ws.R(i - 1, j), ws.R(i, j - 1), gamma);
    }
  }
  out.value = ws.R(ws.rows, ws.cols);
  return out;
}

TimeSeries soft_dtw_grad(SoftDtwWorkspace& ws, const TimeSeries& x, const TimeSeries& y) {
  if (x.length() != ws.rows || y.length() != ws.cols || ws.r.size() != (ws.rows + 2) * (ws.cols + 2) ||
      x.channels() != y.channels()) {
    throw PreconditionError("soft-DTW workspace does not match the series pair");
  }
  const std::size_t m = ws.rows, n = ws.cols;
  const double gamma = ws.gamma;
  // e(i, j): d value / d r(i, j), 1-based over the interior; border stays 0.
  std::vector<double> e((m + 2) * (n + 2), 0.0);
  const auto at = [n](std::size_t i, std::size_t j) { return i * (n + 2) + j; };
  e[at(m, n)] = 1.0;
  for (std::size_t i = m; i >= 1; --i) {
    for (std::size_t j = n; j >= 1; --j) {
      if (i == m && j == n) continue;
      const double rij = ws.R(i, j);
      double acc = 0.0;
      if (i < m) acc += e[at(i + 1, j)] * std::exp((ws.R(i + 1, j) - rij - ws.cost(i, j - 1)) / gamma);
      if (j < n) acc += e[at(i, j + 1)] * std::exp((ws.R(i, j + 1) - rij - ws.cost(i - 1, j)) / gamma);
      if (i < m && j < n) acc += e[at(i + 1, j + 1)] * std::exp((ws.R(i + 1, j + 1) - rij - ws.cost(i, j)) / gamma);
      e[at(i, j)] = acc;
    }
  }

  ws.e.assign(m * n, 0.0);
  TimeSeries grad(m, x.channels());
  const std::size_t d = x.channels();
  for (std::size_t i = 0; i < m; ++i) {
    const auto xi = x.at(i);
    for (std::size_t j = 0; j < n; ++j) {
      const double w = e[at(i + 1, j + 1)];
      ws.e[i * n + j] = w;
      if (w == 0.0) continue;
      const auto yj = y.at(j);
      for (std::size_t ch = 0; ch < d; ++ch) grad(i, ch) += 2.0 * w * (xi[ch] - yj[ch]);
    }
  }
  return grad;
}

namespace {

void extend(std::size_t i, std::size_t j, std::size_t m, std::size_t n, AlignmentPath& current,
            std::vector<AlignmentPath>& out) {
  current.emplace_back(i, j);
  if (i == m - 1 && j == n - 1) {
    out.push_back(current);
  } else {
    if (i + 1 < m && j + 1 < n) extend(i + 1, j + 1, m, n, current, out);
    if (i + 1 < m) extend(i + 1, j, m, n, current, out);
    if (j + 1 < n) extend(i, j + 1, m, n, current, out);
  }
  current.pop_back();
}

}  // namespace

std::vector<AlignmentPath> brute_force_paths(std::size_t m, std::size_t m_prime) {
  if (m == 0 || m_prime == 0) throw std::invalid_argument("path enumeration needs m, m' >= 1");
  if (m > 8 || m_prime > 8) {
    throw std::invalid_argument("path enumeration is limited to m, m' <= 8 (got " + std::to_string(m) + ", " +
                                std::to_string(m_prime) + ")");
  }
  std::vector<AlignmentPath> out;
  AlignmentPath current;
  extend(0, 0, m, m_prime, current, out);
  return out;
}

double delannoy(std::size_t m, std::size_t m_prime) {
  if (m == 0 || m_prime == 0) return 0.0;
  std::vector<double> row(m_prime, 1.0);
  for (std::size_t i = 1; i < m; ++i) {
    double diag = row[0];
    for (std::size_t j = 1; j < m_prime; ++j) {
      const double up = row[j];
      row[j] = up + row[j - 1] + diag;
      diag = up;
    }
  }
  return row[m_prime - 1];
}

double path_cost(const CostMatrix& cost, const AlignmentPath& path) {
  double total = 0.0;
  for (const auto& [i, j] : path) total += cost(i, j);
  return total;
}

}  // namespace cfx::warp
