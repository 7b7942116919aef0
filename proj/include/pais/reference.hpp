#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <optional>
#include <vector>

#include "pais/core.hpp"
#include "pais/grid.hpp"

namespace pais {

/// Weighted quadrature nodes carrying the normalized log posterior at each node.
struct QuadratureRule {
  PointSet nodes;
  std::vector<double> weights;
  std::vector<double> log_density;  // normalized: sum_i weights_i * exp(log_density_i) == 1
};

/// Reference statistics for a posterior whose density can be integrated numerically.
struct AnalyticReference {
  /// Raw moments E[X^1], E[X^2], E[X^3] per coordinate.
  std::vector<std::array<double, 3>> moments;
  /// Bin geometry and the posterior mass in each bin (integral of the normalized density).
  GridSpec grid;
  std::vector<double> bin_mass;
  /// KL(posterior || prior).
  double kl_prior = kNaN;
  /// log of the normalizing constant of exp(log_density).
  double log_normalizer = kNaN;

  double moment(std::size_t coord, int order) const { return moments.at(coord).at(order - 1); }
};

}  // namespace pais
