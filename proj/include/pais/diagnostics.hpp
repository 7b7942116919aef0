#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "pais/core.hpp"
#include "pais/grid.hpp"
#include "pais/reference.hpp"

namespace pais {

/// Per-iteration sampler statistics.
struct DiagnosticsRecord {
  std::size_t iteration = 0;
  double ess = kNaN;
  double weight_variance = kNaN;
  /// Accepted moves across all chains in this iteration (MH only).
  std::optional<std::size_t> acceptance_count;
  double beta = kNaN;
  std::size_t drift_fallbacks = 0;
  bool burned_in = false;
};

// ---------------------------------------------------------------------------
// Effective sample size and weight variance

/// (sum w)^2 / sum w^2 from log weights, max-shifted.
inline double ess_log(std::span<const double> log_w) {
  double m = kNegInf;
  for (double x : log_w) {
    if (std::isnan(x) || x == kInf) throw DiagnosticError("ess: log weight is NaN or +inf");
    m = std::max(m, x);
  }
  if (m == kNegInf) throw DiagnosticError("ess: all weights are zero");
  double s1 = 0.0, s2 = 0.0;
  for (double x : log_w) {
    const double e = std::exp(x - m);
    s1 += e;
    s2 += e * e;
  }
  return s1 * s1 / s2;
}

inline double ess(std::span<const double> w) {
  std::vector<double> lw(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (w[i] < 0.0 || std::isnan(w[i])) throw DiagnosticError("ess: negative or NaN weight");
    lw[i] = std::log(w[i]);
  }
  return ess_log(lw);
}

/// Sample variance (n-1 denominator) of the weights rescaled to mean 1.
inline double weight_variance_log(std::span<const double> log_w) {
  const std::vector<double> p = normalize_log_weights(log_w);
  const auto n = static_cast<double>(p.size());
  if (p.size() < 2) return 0.0;
  double ss = 0.0;
  for (double x : p) {
    const double d = x * n - 1.0;
    ss += d * d;
  }
  return ss / (n - 1.0);
}

inline double weight_variance(std::span<const double> w) {
  std::vector<double> lw(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (w[i] < 0.0 || std::isnan(w[i])) throw DiagnosticError("weight_variance: negative or NaN weight");
    lw[i] = std::log(w[i]);
  }
  return weight_variance_log(lw);
}

// ---------------------------------------------------------------------------
// Histograms

/// Normalized histogram: density[i] is the bin value B_i, so that
/// sum_i volume * B_i == 1 over the in-range mass.
struct HistogramGrid {
  GridSpec grid;
  std::vector<double> density;
  /// Fraction of the total weight that fell outside the grid.
  double out_of_range_mass = 0.0;
};

/// Streaming weighted histogram. Weights arrive as logs; bins hold
/// exp(log_w - shift) and are rescaled whenever a larger log weight shows up.
class HistogramAccumulator {
 public:
  explicit HistogramAccumulator(GridSpec grid) : grid_(std::move(grid)), bins_(grid_.total_bins(), 0.0) {
    grid_.validate();
  }

  void add(std::span<const double> point, double log_w = 0.0) {
    if (std::isnan(log_w) || log_w == kInf) throw DiagnosticError("histogram: invalid log weight");
    if (log_w == kNegInf) return;
    if (log_w > shift_) rescale(log_w);
    const double w = std::exp(log_w - shift_);
    if (auto b = grid_.locate(point)) {
      bins_[*b] += w;
      in_ += w;
    } else {
      out_ += w;
    }
  }

  void add_all(const PointSet& points, std::span<const double> log_w = {}) {
    for (std::size_t i = 0; i < points.size(); ++i) add(points[i], log_w.empty() ? 0.0 : log_w[i]);
  }

  HistogramGrid snapshot() const {
    HistogramGrid h{grid_, std::vector<double>(bins_.size(), 0.0), 0.0};
    const double total = in_ + out_;
    if (total > 0.0) h.out_of_range_mass = out_ / total;
    if (in_ > 0.0) {
      const double v = grid_.bin_volume();
      for (std::size_t i = 0; i < bins_.size(); ++i) h.density[i] = bins_[i] / (in_ * v);
    }
    return h;
  }

  const GridSpec& grid() const noexcept { return grid_; }

 private:
  void rescale(double new_shift) {
    if (shift_ != kNegInf) {
      const double f = std::exp(shift_ - new_shift);
      for (double& b : bins_) b *= f;
      in_ *= f;
      out_ *= f;
    }
    shift_ = new_shift;
  }

  GridSpec grid_;
  std::vector<double> bins_;
  double in_ = 0.0, out_ = 0.0;
  double shift_ = kNegInf;
};

/// Weighted histogram of `samples`; empty `log_w` means equal weights.
inline HistogramGrid build_histogram(const PointSet& samples, std::span<const double> log_w,
                                     const GridSpec& grid) {
  if (!samples.empty() && samples.dim() != grid.dim())
    throw DiagnosticError("build_histogram: sample dimension does not match grid");
  if (!log_w.empty() && log_w.size() != samples.size())
    throw DiagnosticError("build_histogram: weight count mismatch");
  HistogramAccumulator acc(grid);
  acc.add_all(samples, log_w);
  return acc.snapshot();
}

/// Relative L2 distance between reference bin masses and histogram masses v*B_i.
inline double relative_l2_error(const HistogramGrid& hist, const AnalyticReference& ref) {
  if (!(hist.grid == ref.grid) || hist.density.size() != ref.bin_mass.size())
    throw DiagnosticError("relative_l2_error: histogram and reference grids differ");
  const double v = hist.grid.bin_volume();
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < ref.bin_mass.size(); ++i) {
    const double d = ref.bin_mass[i] - v * hist.density[i];
    num += d * d;
    den += ref.bin_mass[i] * ref.bin_mass[i];
  }
  if (den == 0.0) throw DiagnosticError("relative_l2_error: reference has no mass on the grid");
  return std::sqrt(num / den);
}

// ---------------------------------------------------------------------------
// Moments

/// Self-normalized weighted raw moment of one coordinate. Empty log_w = uniform.
inline double weighted_moment(const PointSet& samples, std::span<const double> log_w, std::size_t coord,
                              int order) {
  if (samples.empty()) throw DiagnosticError("weighted_moment: no samples");
  std::vector<double> w;
  if (log_w.empty())
    w.assign(samples.size(), 1.0 / static_cast<double>(samples.size()));
  else
    w = normalize_log_weights(log_w);
  double s = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) s += w[i] * std::pow(samples[i][coord], order);
  return s;
}

inline double relative_moment_error(const PointSet& samples, std::span<const double> log_w,
                                    std::size_t coord, int order, double reference_moment) {
  if (order < 1 || order > 3) throw DiagnosticError("relative_moment_error: order must be 1, 2 or 3");
  if (reference_moment == 0.0)
    throw DiagnosticError("relative_moment_error: reference moment is zero; use absolute_moment_error");
  return std::abs(weighted_moment(samples, log_w, coord, order) - reference_moment) /
         std::abs(reference_moment);
}

inline double absolute_moment_error(const PointSet& samples, std::span<const double> log_w,
                                    std::size_t coord, int order, double reference_moment) {
  return std::abs(weighted_moment(samples, log_w, coord, order) - reference_moment);
}

// ---------------------------------------------------------------------------

/// KL(posterior || prior) by quadrature. +inf when the prior vanishes where the
/// posterior has mass.
inline double kl_divergence(const QuadratureRule& posterior,
                            const std::function<double(std::span<const double>)>& log_prior) {
  double kl = 0.0;
  for (std::size_t i = 0; i < posterior.weights.size(); ++i) {
    const double lp = posterior.log_density[i];
    if (lp == kNegInf) continue;
    const double lq = log_prior(posterior.nodes[i]);
    if (lq == kNegInf) return kInf;
    kl += posterior.weights[i] * std::exp(lp) * (lp - lq);
  }
  return kl;
}

}  // namespace pais
