#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include "pais/core.hpp"

namespace pais {

/// Rectangular grid of equal-width bins over [lower, upper] per dimension.
/// Bins are half-open [a, b); the top edge of the last bin is closed.
struct GridSpec {
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<std::size_t> bins;

  std::size_t dim() const noexcept { return bins.size(); }

  std::size_t total_bins() const noexcept {
    std::size_t n = 1;
    for (auto b : bins) n *= b;
    return bins.empty() ? 0 : n;
  }

  double width(std::size_t k) const { return (upper[k] - lower[k]) / static_cast<double>(bins[k]); }

  double bin_volume() const {
    double v = 1.0;
    for (std::size_t k = 0; k < dim(); ++k) v *= width(k);
    return v;
  }

  void validate() const {
    if (dim() == 0 || lower.size() != dim() || upper.size() != dim())
      throw ParameterError("GridSpec: inconsistent dimensions");
    for (std::size_t k = 0; k < dim(); ++k)
      if (!(upper[k] > lower[k]) || bins[k] == 0)
        throw ParameterError("GridSpec: empty range or zero bins");
  }

  /// Flat (row-major, first coordinate slowest) index of the bin holding p.
  std::optional<std::size_t> locate(std::span<const double> p) const {
    std::size_t flat = 0;
    for (std::size_t k = 0; k < dim(); ++k) {
      const double x = p[k];
      if (!(x >= lower[k]) || !(x <= upper[k])) return std::nullopt;
      auto b = static_cast<std::size_t>((x - lower[k]) / width(k));
      if (b >= bins[k]) b = bins[k] - 1;
      flat = flat * bins[k] + b;
    }
    return flat;
  }

  /// Per-dimension bin coordinates of a flat index.
  std::vector<std::size_t> unflatten(std::size_t flat) const {
    std::vector<std::size_t> idx(dim());
    for (std::size_t k = dim(); k-- > 0;) {
      idx[k] = flat % bins[k];
      flat /= bins[k];
    }
    return idx;
  }

  double bin_lower(std::size_t k, std::size_t b) const {
    return lower[k] + width(k) * static_cast<double>(b);
  }

  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

inline GridSpec grid_1d(double lo, double hi, std::size_t bins) { return {{lo}, {hi}, {bins}}; }

inline GridSpec grid_2d(double lo0, double hi0, std::size_t b0, double lo1, double hi1,
                        std::size_t b1) {
  return {{lo0, lo1}, {hi0, hi1}, {b0, b1}};
}

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration on P_n.
inline void gauss_legendre(std::size_t n, std::vector<double>& nodes, std::vector<double>& weights) {
  nodes.assign(n, 0.0);
  weights.assign(n, 0.0);
  for (std::size_t i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) /
                        (static_cast<double>(n) + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (std::size_t k = 2; k <= n; ++k) {
        const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / static_cast<double>(k);
        p0 = p1;
        p1 = pk;
      }
      dp = static_cast<double>(n) * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    nodes[i] = -x;
    nodes[n - 1 - i] = x;
    weights[i] = weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
}

}  // namespace pais
