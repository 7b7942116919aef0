#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "pais/core.hpp"
#include "pais/targets.hpp"

namespace pais {

enum class KernelKind { rw_gaussian, gamma_mean_centered, gamma_langevin };

inline std::string_view to_string(KernelKind k) {
  switch (k) {
    case KernelKind::rw_gaussian: return "rw_gaussian";
    case KernelKind::gamma_mean_centered: return "gamma_mean_centered";
    case KernelKind::gamma_langevin: return "gamma_langevin";
  }
  return "?";
}

inline KernelKind kernel_kind_from_string(std::string_view s) {
  if (s == "rw_gaussian") return KernelKind::rw_gaussian;
  if (s == "gamma_mean_centered") return KernelKind::gamma_mean_centered;
  if (s == "gamma_langevin") return KernelKind::gamma_langevin;
  throw ParameterError("unknown kernel kind '" + std::string(s) + "'");
}

/// Transition density nu(.; x) with scaling parameter beta.
///
/// rw_gaussian:          y = x + beta * L * omega, omega ~ N(0, I), Sigma = L L^T.
/// gamma_mean_centered:  y_c ~ Gamma with mean x_c and variance beta^2.
/// gamma_langevin:       as above with mean x + beta^2/2 * grad log pi(x).
struct ProposalKernel {
  KernelKind kind = KernelKind::rw_gaussian;
  double beta = 1.0;
  /// Row-major d x d scale matrix for rw_gaussian; empty means identity.
  std::vector<double> covariance;

  static ProposalKernel rw_gaussian(double beta, std::vector<double> covariance = {}) {
    return {KernelKind::rw_gaussian, beta, std::move(covariance)};
  }
  static ProposalKernel gamma(double beta) { return {KernelKind::gamma_mean_centered, beta, {}}; }
  static ProposalKernel gamma_langevin(double beta) { return {KernelKind::gamma_langevin, beta, {}}; }

  ProposalKernel with_beta(double b) const {
    ProposalKernel k = *this;
    k.beta = b;
    return k;
  }

  bool symmetric() const noexcept { return kind == KernelKind::rw_gaussian; }

  /// Lower Cholesky factor of the covariance (identity when unset).
  std::vector<double> cholesky(std::size_t dim) const {
    std::vector<double> l(dim * dim, 0.0);
    if (covariance.empty()) {
      for (std::size_t i = 0; i < dim; ++i) l[i * dim + i] = 1.0;
      return l;
    }
    if (covariance.size() != dim * dim) throw ParameterError("kernel covariance has wrong size");
    for (std::size_t i = 0; i < dim; ++i)
      for (std::size_t j = 0; j < dim; ++j)
        if (covariance[i * dim + j] != covariance[j * dim + i])
          throw ParameterError("kernel covariance is not symmetric");
    for (std::size_t j = 0; j < dim; ++j) {
      double d = covariance[j * dim + j];
      for (std::size_t k = 0; k < j; ++k) d -= l[j * dim + k] * l[j * dim + k];
      if (!(d > 0.0)) throw ParameterError("kernel covariance is not positive definite");
      l[j * dim + j] = std::sqrt(d);
      for (std::size_t i = j + 1; i < dim; ++i) {
        double s = covariance[i * dim + j];
        for (std::size_t k = 0; k < j; ++k) s -= l[i * dim + k] * l[j * dim + k];
        l[i * dim + j] = s / l[j * dim + j];
      }
    }
    return l;
  }

  void validate(std::size_t dim) const {
    if (!(beta >= 0.0) || !std::isfinite(beta)) throw ParameterError("kernel beta must be finite and >= 0");
    if (kind != KernelKind::rw_gaussian && beta == 0.0) throw ParameterError("gamma kernels need beta > 0");
    if (kind == KernelKind::rw_gaussian) (void)cholesky(dim);
  }
};

/// A kernel evaluated at one center, with its distribution parameters resolved.
class KernelComponent {
 public:
  KernelKind kind() const noexcept { return kind_; }
  double beta() const noexcept { return beta_; }
  /// Location parameter: the center for rw_gaussian, the Gamma means otherwise.
  const Point& location() const noexcept { return location_; }
  /// Coordinates where the Langevin mean was nonpositive and the center was used instead.
  std::size_t drift_fallbacks() const noexcept { return fallbacks_; }

  void sample(RandomStream& rng, std::span<double> out) const {
    const std::size_t d = location_.size();
    if (kind_ == KernelKind::rw_gaussian) {
      if (beta_ == 0.0) {
        std::copy(location_.begin(), location_.end(), out.begin());
        return;
      }
      Point omega(d);
      for (auto& w : omega) w = std::normal_distribution<double>(0.0, 1.0)(rng);
      for (std::size_t i = 0; i < d; ++i) {
        double s = 0.0;
        for (std::size_t k = 0; k <= i; ++k) s += scale_[i * d + k] * omega[k];
        out[i] = location_[i] + s;
      }
      return;
    }
    for (std::size_t c = 0; c < d; ++c)
      out[c] = std::gamma_distribution<double>(shape_[c], 1.0 / rate_[c])(rng);
  }

  double log_density(std::span<const double> y) const {
    const std::size_t d = location_.size();
    if (kind_ == KernelKind::rw_gaussian) {
      if (beta_ == 0.0) {
        for (std::size_t i = 0; i < d; ++i)
          if (y[i] != location_[i]) return kNegInf;
        return kInf;
      }
      // Forward substitution: z = (beta L)^{-1} (y - x).
      double quad = 0.0;
      double z_buf[4];
      std::vector<double> z_heap;
      double* z = d <= 4 ? z_buf : (z_heap.resize(d), z_heap.data());
      for (std::size_t i = 0; i < d; ++i) {
        double s = y[i] - location_[i];
        for (std::size_t k = 0; k < i; ++k) s -= scale_[i * d + k] * z[k];
        z[i] = s / scale_[i * d + i];
        quad += z[i] * z[i];
      }
      return log_norm_ - 0.5 * quad;
    }
    double l = log_norm_;
    for (std::size_t c = 0; c < d; ++c) {
      if (!(y[c] > 0.0) || !std::isfinite(y[c])) return kNegInf;
      l += (shape_[c] - 1.0) * std::log(y[c]) - rate_[c] * y[c];
    }
    return l;
  }

  friend KernelComponent prepare_component(const ProposalKernel& kernel, std::span<const double> center,
                                           const TargetPosterior& target);

 private:
  KernelKind kind_ = KernelKind::rw_gaussian;
  double beta_ = 0.0;
  Point location_;
  std::vector<double> scale_;  // beta * L for rw_gaussian
  std::vector<double> shape_, rate_;
  double log_norm_ = 0.0;
  std::size_t fallbacks_ = 0;
};

inline KernelComponent prepare_component(const ProposalKernel& kernel, std::span<const double> center,
                                         const TargetPosterior& target) {
  const std::size_t d = center.size();
  if (d != target.dim) throw ParameterError("kernel center dimension does not match target");
  if (!(kernel.beta >= 0.0) || !std::isfinite(kernel.beta)) throw ParameterError("kernel beta must be >= 0");
  KernelComponent c;
  c.kind_ = kernel.kind;
  c.beta_ = kernel.beta;
  c.location_.assign(center.begin(), center.end());

  if (kernel.kind == KernelKind::rw_gaussian) {
    c.scale_ = kernel.cholesky(d);
    for (double& v : c.scale_) v *= kernel.beta;
    c.log_norm_ = -0.5 * static_cast<double>(d) * std::log(2.0 * std::numbers::pi);
    for (std::size_t i = 0; i < d; ++i) c.log_norm_ -= std::log(c.scale_[i * d + i]);
    return c;
  }

  if (!(kernel.beta > 0.0)) throw ParameterError("gamma kernels need beta > 0");
  for (double x : center)
    if (!(x > 0.0) || !std::isfinite(x)) throw ProposalError("gamma kernel center must be strictly positive");
  const double b2 = kernel.beta * kernel.beta;
  if (kernel.kind == KernelKind::gamma_langevin) {
    const Point g = target.gradient(center);
    for (std::size_t i = 0; i < d; ++i) {
      const double m = center[i] + 0.5 * b2 * g[i];
      if (m > 0.0 && std::isfinite(m)) {
        c.location_[i] = m;
      } else {
        ++c.fallbacks_;
      }
    }
  }
  c.shape_.resize(d);
  c.rate_.resize(d);
  c.log_norm_ = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    const double m = c.location_[i];
    c.shape_[i] = m * m / b2;
    c.rate_[i] = m / b2;
    c.log_norm_ += c.shape_[i] * std::log(c.rate_[i]) - boost::math::lgamma(c.shape_[i]);
  }
  return c;
}

/// Draw y ~ nu(.; center).
inline Point sample_kernel(const ProposalKernel& kernel, std::span<const double> center,
                           const TargetPosterior& target, RandomStream& rng) {
  const KernelComponent c = prepare_component(kernel, center, target);
  Point y(center.size());
  c.sample(rng, y);
  return y;
}

inline double log_kernel_density(const ProposalKernel& kernel, std::span<const double> y,
                                 std::span<const double> center, const TargetPosterior& target) {
  return prepare_component(kernel, center, target).log_density(y);
}

/// log( (1/M) sum_j nu_j(y) ) with a running max shift. The result is never
/// below max_j log nu_j(y) - log M.
inline double mixture_log_density(std::span<const KernelComponent> components, std::span<const double> y) {
  if (components.empty()) throw ParameterError("mixture needs at least one component");
  double m = kNegInf, s = 0.0;
  for (const auto& c : components) {
    const double v = c.log_density(y);
    if (v == kNegInf) continue;
    if (v > m) {
      s = (m == kNegInf ? 0.0 : s * std::exp(m - v)) + 1.0;
      m = v;
    } else {
      s += std::exp(v - m);
    }
  }
  if (m == kNegInf) return kNegInf;
  return m + std::log(s) - std::log(static_cast<double>(components.size()));
}

inline std::vector<KernelComponent> prepare_components(std::span<const ProposalKernel> kernels,
                                                       const PointSet& centers, const TargetPosterior& target,
                                                       std::size_t threads = 1) {
  if (kernels.size() != centers.size()) throw ParameterError("need one kernel per ensemble member");
  std::vector<KernelComponent> out(centers.size());
  parallel_for(centers.size(), threads,
               [&](std::size_t j) { out[j] = prepare_component(kernels[j], centers[j], target); });
  return out;
}

/// log w_j = log pi(y_j) - log chi(y_j; X). Proposals outside the target's
/// support get log weight -inf.
inline std::vector<double> compute_weights(const TargetPosterior& target, const PointSet& proposals,
                                           std::span<const KernelComponent> components, std::size_t threads = 1) {
  std::vector<double> log_w(proposals.size());
  parallel_for(proposals.size(), threads, [&](std::size_t j) {
    const double lp = target.log_density(proposals[j]);
    if (lp == kNegInf) {
      log_w[j] = kNegInf;
      return;
    }
    const double lc = mixture_log_density(components, proposals[j]);
    if (lc == kNegInf) throw ProposalError("proposal has zero mixture density");
    log_w[j] = lp - lc;
  });
  return log_w;
}

/// Ensemble states with (unnormalized) log weights.
struct Ensemble {
  PointSet states;
  std::vector<double> log_weights;
  std::size_t iteration = 0;

  std::size_t size() const noexcept { return states.size(); }
  std::vector<double> normalized_weights() const { return normalize_log_weights(log_weights); }
};

}  // namespace pais
