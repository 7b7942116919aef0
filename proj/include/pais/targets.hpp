#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "pais/core.hpp"
#include "pais/diagnostics.hpp"
#include "pais/grid.hpp"
#include "pais/reference.hpp"

namespace pais {

struct Bounds {
  double lower = kNegInf;
  double upper = kInf;
};

/// Unnormalized posterior density with optional gradient and reference statistics.
///
/// log_density() returns -inf outside the (open) support. The callables must be
/// pure: they are evaluated concurrently from many workers.
struct TargetPosterior {
  using LogDensityFn = std::function<double(std::span<const double>)>;
  using GradientFn = std::function<Point(std::span<const double>)>;
  using PriorSampler = std::function<Point(RandomStream&)>;

  std::string name;
  std::size_t dim = 0;
  LogDensityFn unnormalized_log_density;
  GradientFn gradient_fn;
  std::vector<Bounds> support;
  std::optional<AnalyticReference> reference;
  /// Normalized log prior density; used for KL and the default initial ensemble.
  LogDensityFn log_prior;
  PriorSampler sample_prior;

  bool in_support(std::span<const double> x) const noexcept {
    for (std::size_t k = 0; k < dim; ++k) {
      if (!std::isfinite(x[k])) return false;
      if (!(x[k] > support[k].lower) || !(x[k] < support[k].upper)) return false;
    }
    return true;
  }

  double log_density(std::span<const double> x) const {
    if (!in_support(x)) return kNegInf;
    return unnormalized_log_density(x);
  }

  bool has_gradient() const noexcept { return static_cast<bool>(gradient_fn); }

  Point gradient(std::span<const double> x) const {
    if (!gradient_fn) throw ParameterError("target '" + name + "' has no gradient");
    return gradient_fn(x);
  }
};

namespace detail {

inline double log_normal_pdf(double x, double mean, double var) {
  const double d = x - mean;
  return -0.5 * d * d / var - 0.5 * std::log(2.0 * std::numbers::pi * var);
}

inline double log_gamma_pdf(double x, double shape, double rate) {
  if (!(x > 0.0)) return kNegInf;
  return shape * std::log(rate) - boost::math::lgamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
}

inline void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) throw ParameterError(std::string(name) + " must be positive and finite");
}

/// Reference statistics of a 1-D density from a trapezoid rule on [lo, hi]
/// and Gauss-Legendre integration inside each histogram bin.
inline AnalyticReference reference_1d(const std::function<double(double)>& log_density,
                                      const std::function<double(std::span<const double>)>& log_prior,
                                      double lo, double hi, const GridSpec& grid,
                                      std::size_t points = 4096, std::size_t nodes_per_bin = 16) {
  grid.validate();
  QuadratureRule rule;
  rule.nodes = PointSet(points, 1);
  rule.weights.assign(points, (hi - lo) / static_cast<double>(points - 1));
  rule.weights.front() *= 0.5;
  rule.weights.back() *= 0.5;
  rule.log_density.resize(points);
  double m = kNegInf;
  for (std::size_t i = 0; i < points; ++i) {
    const double x = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
    rule.nodes[i][0] = x;
    rule.log_density[i] = log_density(x);
    m = std::max(m, rule.log_density[i]);
  }
  double z = 0.0;
  for (std::size_t i = 0; i < points; ++i) z += rule.weights[i] * std::exp(rule.log_density[i] - m);
  const double log_z = m + std::log(z);
  for (double& l : rule.log_density) l -= log_z;

  AnalyticReference ref;
  ref.log_normalizer = log_z;
  std::array<double, 3> mom{0.0, 0.0, 0.0};
  for (std::size_t i = 0; i < points; ++i) {
    const double p = rule.weights[i] * std::exp(rule.log_density[i]);
    const double x = rule.nodes[i][0];
    mom[0] += p * x;
    mom[1] += p * x * x;
    mom[2] += p * x * x * x;
  }
  ref.moments = {mom};
  ref.kl_prior = kl_divergence(rule, log_prior);

  ref.grid = grid;
  ref.bin_mass.assign(grid.total_bins(), 0.0);
  std::vector<double> gx, gw;
  gauss_legendre(nodes_per_bin, gx, gw);
  const double h = grid.width(0);
  for (std::size_t b = 0; b < grid.bins[0]; ++b) {
    const double a = grid.bin_lower(0, b);
    double s = 0.0;
    for (std::size_t q = 0; q < gx.size(); ++q)
      s += gw[q] * std::exp(log_density(a + 0.5 * h * (gx[q] + 1.0)) - log_z);
    ref.bin_mass[b] = 0.5 * h * s;
  }
  return ref;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Scalar benchmark posteriors

inline GridSpec default_gaussian_grid() { return grid_1d(0.0, 4.0, 200); }
inline GridSpec default_bimodal_grid() { return grid_1d(-3.0, 3.0, 240); }
inline GridSpec default_chemical_grid() { return grid_2d(0.0, 400.0, 100, 0.0, 400.0, 100); }

/// Linear observation G(x) = x, prior N(0, tau2), noise N(0, sigma2).
inline TargetPosterior make_gaussian_target(double tau2, double sigma2, double data,
                                            const GridSpec& grid = default_gaussian_grid()) {
  detail::require_positive(tau2, "tau2");
  detail::require_positive(sigma2, "sigma2");
  if (!std::isfinite(data)) throw ParameterError("data must be finite");

  TargetPosterior t;
  t.name = "gaussian";
  t.dim = 1;
  t.support = {Bounds{}};
  t.unnormalized_log_density = [=](std::span<const double> x) {
    const double r = x[0] - data;
    return -0.5 * r * r / sigma2 - 0.5 * x[0] * x[0] / tau2;
  };
  t.gradient_fn = [=](std::span<const double> x) { return Point{-(x[0] - data) / sigma2 - x[0] / tau2}; };
  t.log_prior = [=](std::span<const double> x) { return detail::log_normal_pdf(x[0], 0.0, tau2); };
  t.sample_prior = [=](RandomStream& rng) {
    return Point{std::normal_distribution<double>(0.0, std::sqrt(tau2))(rng)};
  };

  const double var = sigma2 * tau2 / (sigma2 + tau2);
  const double mean = data * tau2 / (sigma2 + tau2);
  const double sd = std::sqrt(var);
  auto log_d = [=](double x) {
    const double r = x - data;
    return -0.5 * r * r / sigma2 - 0.5 * x * x / tau2;
  };
  AnalyticReference ref = detail::reference_1d(log_d, t.log_prior, mean - 12.0 * sd, mean + 12.0 * sd, grid);
  // Conjugate closed form for the moments; the quadrature values agree to ~1e-12.
  ref.moments = {{mean, mean * mean + var, mean * mean * mean + 3.0 * mean * var}};
  t.reference = std::move(ref);
  return t;
}

/// Closed-form log normalizer of the Gaussian target's exp(log_density).
inline double gaussian_log_normalizer(double tau2, double sigma2, double data) {
  const double var = sigma2 * tau2 / (sigma2 + tau2);
  return 0.5 * std::log(2.0 * std::numbers::pi * var) - 0.5 * data * data / (sigma2 + tau2);
}

/// Quadratic observation G(x) = x^2, prior N(0, tau2), noise N(0, sigma2).
inline TargetPosterior make_bimodal_target(double tau2, double sigma2, double data,
                                           const GridSpec& grid = default_bimodal_grid()) {
  detail::require_positive(tau2, "tau2");
  detail::require_positive(sigma2, "sigma2");
  if (!std::isfinite(data)) throw ParameterError("data must be finite");

  TargetPosterior t;
  t.name = "bimodal";
  t.dim = 1;
  t.support = {Bounds{}};
  auto log_d = [=](double x) {
    const double r = x * x - data;
    return -0.5 * r * r / sigma2 - 0.5 * x * x / tau2;
  };
  t.unnormalized_log_density = [=](std::span<const double> x) { return log_d(x[0]); };
  t.gradient_fn = [=](std::span<const double> x) {
    return Point{-2.0 * x[0] * (x[0] * x[0] - data) / sigma2 - x[0] / tau2};
  };
  t.log_prior = [=](std::span<const double> x) { return detail::log_normal_pdf(x[0], 0.0, tau2); };
  t.sample_prior = [=](RandomStream& rng) {
    return Point{std::normal_distribution<double>(0.0, std::sqrt(tau2))(rng)};
  };

  // Laplace approximation at the positive mode (or at 0 when unimodal).
  const double mode_sq = data - sigma2 / (2.0 * tau2);
  const double mode = mode_sq > 0.0 ? std::sqrt(mode_sq) : 0.0;
  const double curvature = (6.0 * mode * mode - 2.0 * data) / sigma2 + 1.0 / tau2;
  const double sd = curvature > 0.0 ? 1.0 / std::sqrt(curvature) : std::sqrt(tau2);
  const double half = mode + 12.0 * sd;
  t.reference = detail::reference_1d(log_d, t.log_prior, -half, half, grid);
  return t;
}

// ---------------------------------------------------------------------------
// Chemical kinetics: 0 -k1-> S1 <-k2,k3-> S2 -k4-> 0

/// Effective degradation rate of S = X1 + X2 under the QSSA.
inline double qssa_rate(double k2, double k3, double k4) noexcept { return k2 * k4 / (k2 + k3); }

/// S(t) = (k1/r)(1 - exp(-r t)), r = k2 k4 / (k2 + k3), S(0) = 0.
inline double qssa_trajectory(double k2, double k3, double k1, double k4, double t) {
  for (double v : {k1, k2, k3, k4}) detail::require_positive(v, "rate constant");
  if (!(t >= 0.0)) throw ParameterError("time must be nonnegative");
  const double r = qssa_rate(k2, k3, k4);
  return k1 / r * -std::expm1(-r * t);
}

/// Populations (X1, X2) of the full linear system at the requested times,
/// from X1(0) = X2(0) = 0 by fixed-step RK4. The step starts at `h0` and is
/// halved until halving it again changes every output by less than `rel_tol`.
inline std::vector<std::array<double, 2>> full_system_trajectory(double k1, double k2, double k3, double k4,
                                                                  std::span<const double> times,
                                                                  double h0 = 1e-3, double rel_tol = 1e-8,
                                                                  double h_min = 1e-7) {
  for (double v : {k1, k2, k3, k4}) detail::require_positive(v, "rate constant");
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (!(times[i] >= 0.0)) throw ParameterError("times must be nonnegative");
    if (i > 0 && times[i] < times[i - 1]) throw ParameterError("times must be nondecreasing");
  }

  auto integrate = [&](double h) {
    std::vector<std::array<double, 2>> out;
    out.reserve(times.size());
    std::array<double, 2> x{0.0, 0.0};
    double t = 0.0;
    auto f = [&](const std::array<double, 2>& s) {
      return std::array<double, 2>{k1 - k2 * s[0] + k3 * s[1], k2 * s[0] - (k3 + k4) * s[1]};
    };
    auto step = [&](double dt) {
      const auto a = f(x);
      const auto b = f({x[0] + 0.5 * dt * a[0], x[1] + 0.5 * dt * a[1]});
      const auto c = f({x[0] + 0.5 * dt * b[0], x[1] + 0.5 * dt * b[1]});
      const auto d = f({x[0] + dt * c[0], x[1] + dt * c[1]});
      for (int k = 0; k < 2; ++k) x[k] += dt / 6.0 * (a[k] + 2.0 * b[k] + 2.0 * c[k] + d[k]);
      t += dt;
    };
    for (double target : times) {
      const auto n = static_cast<std::size_t>(std::floor((target - t) / h));
      for (std::size_t s = 0; s < n; ++s) step(h);
      if (target - t > 0.0) step(target - t);
      t = target;
      out.push_back(x);
    }
    return out;
  };

  auto coarse = integrate(h0);
  for (double h = h0; h >= h_min; h *= 0.5) {
    auto fine = integrate(0.5 * h);
    bool converged = true;
    for (std::size_t i = 0; i < fine.size() && converged; ++i)
      for (int k = 0; k < 2; ++k) {
        const double scale = std::max(std::abs(fine[i][k]), 1e-300);
        if (!std::isfinite(coarse[i][k]) || std::abs(fine[i][k] - coarse[i][k]) > rel_tol * scale) {
          converged = false;
          break;
        }
      }
    if (converged) return fine;
    coarse = std::move(fine);
  }
  throw IntegrationError("full_system_trajectory: step-size refinement did not converge");
}

struct ChemicalModel {
  double k1 = 100.0;
  double k4 = 1.0;
  /// Observation noise variance.
  double sigma2 = 225.0;
  std::vector<double> obs_times;
  std::vector<double> data;
  /// Gamma prior on k2 and k3 (shape/rate): mean 75, variance 100.
  double alpha0 = 56.25;
  double beta0 = 0.75;

  void validate() const {
    for (double v : {k1, k4, sigma2, alpha0, beta0}) detail::require_positive(v, "chemical model parameter");
    if (obs_times.empty() || obs_times.size() != data.size())
      throw ParameterError("chemical model: need matching, nonempty obs_times and data");
    for (std::size_t i = 0; i < obs_times.size(); ++i) {
      detail::require_positive(obs_times[i], "observation time");
      detail::require_positive(data[i], "observation");
      if (i > 0 && !(obs_times[i] > obs_times[i - 1]))
        throw ParameterError("chemical model: obs_times must be strictly increasing");
    }
  }
};

/// Observation times t = 2, 4, ..., 20.
inline std::vector<double> default_observation_times() {
  std::vector<double> t;
  for (int i = 1; i <= 10; ++i) t.push_back(2.0 * i);
  return t;
}

/// Gamma (shape, rate) with the given mean and variance.
inline std::pair<double, double> gamma_from_moments(double mean, double var) {
  detail::require_positive(mean, "gamma mean");
  detail::require_positive(var, "gamma variance");
  return {mean * mean / var, mean / var};
}

namespace detail {

/// Log likelihood of the chemical data; depends on (k2, k3) only through the QSSA rate.
inline double chemical_log_likelihood(const ChemicalModel& m, double k2, double k3) {
  const double r = qssa_rate(k2, k3, m.k4);
  double ll = 0.0;
  for (std::size_t i = 0; i < m.data.size(); ++i) {
    const double g = m.k1 / r * -std::expm1(-r * m.obs_times[i]);
    ll += log_gamma_pdf(m.data[i], g * g / m.sigma2, g / m.sigma2);
  }
  return ll;
}

}  // namespace detail

/// Posterior over (k2, k3) with Gamma observation noise and Gamma priors.
inline TargetPosterior make_chemical_target(const ChemicalModel& model) {
  model.validate();
  TargetPosterior t;
  t.name = "chemical";
  t.dim = 2;
  t.support = {Bounds{0.0, kInf}, Bounds{0.0, kInf}};
  t.log_prior = [m = model](std::span<const double> k) {
    return detail::log_gamma_pdf(k[0], m.alpha0, m.beta0) + detail::log_gamma_pdf(k[1], m.alpha0, m.beta0);
  };
  t.unnormalized_log_density = [m = model, prior = t.log_prior](std::span<const double> k) {
    return detail::chemical_log_likelihood(m, k[0], k[1]) + prior(k);
  };
  t.gradient_fn = [m = model](std::span<const double> k) {
    const double k2 = k[0], k3 = k[1];
    const double s = k2 + k3;
    const double r = k2 * m.k4 / s;
    const double dr_dk2 = m.k4 * k3 / (s * s);
    const double dr_dk3 = -m.k4 * k2 / (s * s);
    double dll_dr = 0.0;
    for (std::size_t i = 0; i < m.data.size(); ++i) {
      const double ti = m.obs_times[i];
      const double e = std::exp(-r * ti);
      const double g = m.k1 / r * (1.0 - e);
      const double dg_dr = -m.k1 / (r * r) * (1.0 - e) + m.k1 / r * ti * e;
      const double shape = g * g / m.sigma2;
      const double rate = g / m.sigma2;
      // d/dg log Gamma(D; g^2/s, g/s)
      const double dll_dg = 2.0 * g / m.sigma2 * (std::log(rate) + std::log(m.data[i]) - boost::math::digamma(shape)) +
                            (g - m.data[i]) / m.sigma2;
      dll_dr += dll_dg * dg_dr;
    }
    return Point{dll_dr * dr_dk2 + (m.alpha0 - 1.0) / k2 - m.beta0,
                 dll_dr * dr_dk3 + (m.alpha0 - 1.0) / k3 - m.beta0};
  };
  t.sample_prior = [a = model.alpha0, b = model.beta0](RandomStream& rng) {
    std::gamma_distribution<double> g(a, 1.0 / b);
    const double k2 = g(rng);
    return Point{k2, g(rng)};
  };
  return t;
}

/// Reference statistics for the chemical posterior. Normalization, moments and
/// KL come from a log-spaced trapezoid grid on [lo, hi]^2; bin masses use
/// Gauss-Legendre points inside every bin of `grid`.
inline AnalyticReference chemical_reference(const TargetPosterior& target,
                                            const GridSpec& grid = default_chemical_grid(),
                                            std::size_t points = 512, double lo = 0.5, double hi = 400.0,
                                            std::size_t nodes_per_bin = 8) {
  if (target.dim != 2) throw ParameterError("chemical_reference: target must be 2-D");
  grid.validate();
  std::vector<double> axis = log_space(lo, hi, points);
  std::vector<double> aw(points, 0.0);
  for (std::size_t i = 0; i + 1 < points; ++i) {
    const double h = axis[i + 1] - axis[i];
    aw[i] += 0.5 * h;
    aw[i + 1] += 0.5 * h;
  }
  QuadratureRule rule;
  rule.nodes = PointSet(points * points, 2);
  rule.weights.resize(points * points);
  rule.log_density.resize(points * points);
  double m = kNegInf;
  for (std::size_t i = 0; i < points; ++i)
    for (std::size_t j = 0; j < points; ++j) {
      const std::size_t n = i * points + j;
      rule.nodes[n][0] = axis[i];
      rule.nodes[n][1] = axis[j];
      rule.weights[n] = aw[i] * aw[j];
      rule.log_density[n] = target.log_density(rule.nodes[n]);
      m = std::max(m, rule.log_density[n]);
    }
  double z = 0.0;
  for (std::size_t n = 0; n < rule.weights.size(); ++n) z += rule.weights[n] * std::exp(rule.log_density[n] - m);
  const double log_z = m + std::log(z);
  for (double& l : rule.log_density) l -= log_z;

  AnalyticReference ref;
  ref.log_normalizer = log_z;
  ref.moments.assign(2, {0.0, 0.0, 0.0});
  for (std::size_t n = 0; n < rule.weights.size(); ++n) {
    const double p = rule.weights[n] * std::exp(rule.log_density[n]);
    for (std::size_t c = 0; c < 2; ++c) {
      const double x = rule.nodes[n][c];
      ref.moments[c][0] += p * x;
      ref.moments[c][1] += p * x * x;
      ref.moments[c][2] += p * x * x * x;
    }
  }
  ref.kl_prior = kl_divergence(rule, target.log_prior);

  ref.grid = grid;
  ref.bin_mass.assign(grid.total_bins(), 0.0);
  std::vector<double> gx, gw;
  gauss_legendre(nodes_per_bin, gx, gw);
  const double h0 = grid.width(0), h1 = grid.width(1);
  for (std::size_t b = 0; b < grid.total_bins(); ++b) {
    const auto idx = grid.unflatten(b);
    const double a0 = grid.bin_lower(0, idx[0]), a1 = grid.bin_lower(1, idx[1]);
    double s = 0.0;
    Point p(2);
    for (std::size_t q = 0; q < gx.size(); ++q)
      for (std::size_t r = 0; r < gx.size(); ++r) {
        p[0] = a0 + 0.5 * h0 * (gx[q] + 1.0);
        p[1] = a1 + 0.5 * h1 * (gx[r] + 1.0);
        const double l = target.log_density(p);
        if (l != kNegInf) s += gw[q] * gw[r] * std::exp(l - log_z);
      }
    ref.bin_mass[b] = 0.25 * h0 * h1 * s;
  }
  return ref;
}

// ---------------------------------------------------------------------------
// Synthetic data

/// D = G(x_ref) + eps with eps ~ N(0, sigma2); noise-free when `noisy` is false.
inline double generate_scalar_data(double g_ref, double sigma2, bool noisy, std::uint64_t seed) {
  detail::require_positive(sigma2, "sigma2");
  if (!noisy) return g_ref;
  RandomStream rng(seed, stream_tag::data, 0, 0);
  return g_ref + std::normal_distribution<double>(0.0, std::sqrt(sigma2))(rng);
}

/// Observations of S = X1 + X2 of the full system at `times`, each drawn from a
/// Gamma distribution with mean S(t_i) and variance `sigma2`.
inline std::vector<double> generate_chemical_data(double k1, double k2, double k3, double k4,
                                                  std::span<const double> times, double sigma2, bool noisy,
                                                  std::uint64_t seed) {
  detail::require_positive(sigma2, "sigma2");
  const auto traj = full_system_trajectory(k1, k2, k3, k4, times);
  std::vector<double> out;
  out.reserve(traj.size());
  RandomStream rng(seed, stream_tag::data, 1, 0);
  for (const auto& x : traj) {
    const double s = x[0] + x[1];
    if (!noisy) {
      out.push_back(s);
      continue;
    }
    const auto [shape, rate] = gamma_from_moments(s, sigma2);
    out.push_back(std::gamma_distribution<double>(shape, 1.0 / rate)(rng));
  }
  return out;
}

}  // namespace pais
