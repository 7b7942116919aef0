#include <gtest/gtest.h>

#include "test_support.hpp"

using namespace pais;
using pais::testing::default_chemical_model;

namespace {

TargetPosterior flat_1d() { return make_gaussian_target(1e6, 1e6, 0.0, grid_1d(-1, 1, 2)); }

}  // namespace

TEST(ProposalKernel, RwZeroBetaReturnsCenter) {
  const auto t = flat_1d();
  RandomStream rng(1);
  const Point x{0.37};
  EXPECT_EQ(sample_kernel(ProposalKernel::rw_gaussian(0.0), x, t, rng), x);
}

TEST(ProposalKernel, RwSampleVariance) {
  const auto t = flat_1d();
  const auto c = prepare_component(ProposalKernel::rw_gaussian(0.5), Point{0.0}, t);
  RandomStream rng(2);
  const int n = 100000;
  double s = 0.0, s2 = 0.0;
  Point y(1);
  for (int i = 0; i < n; ++i) {
    c.sample(rng, y);
    s += y[0];
    s2 += y[0] * y[0];
  }
  const double var = s2 / n - (s / n) * (s / n);
  EXPECT_NEAR(var, 0.25, 0.0025);
}

TEST(ProposalKernel, RwDensityAtMode) {
  const auto t = flat_1d();
  const Point x{1.5};
  EXPECT_NEAR(log_kernel_density(ProposalKernel::rw_gaussian(1.0), x, x, t), -0.5 * std::log(2 * std::numbers::pi),
              1e-15);
}

TEST(ProposalKernel, CovarianceValidation) {
  EXPECT_THROW(ProposalKernel::rw_gaussian(1.0, {1, 2, 2, 1}).validate(2), ParameterError);
  EXPECT_THROW(ProposalKernel::rw_gaussian(1.0, {1, 0.1, 0.2, 1}).validate(2), ParameterError);
  EXPECT_THROW(ProposalKernel::rw_gaussian(1.0, {1, 0, 0}).validate(2), ParameterError);
  EXPECT_THROW(ProposalKernel::rw_gaussian(-1.0).validate(1), ParameterError);
  EXPECT_THROW(ProposalKernel::gamma(0.0).validate(1), ParameterError);
  EXPECT_NO_THROW(ProposalKernel::rw_gaussian(1.0, {2, 0.5, 0.5, 1}).validate(2));
}

TEST(ProposalKernel, GammaParametersFromMoments) {
  const auto t = make_chemical_target(default_chemical_model());
  const Point x{75.0, 75.0};
  const auto c = prepare_component(ProposalKernel::gamma(10.0), x, t);
  // shape 56.25, rate 0.75 per coordinate
  const Point y{60.0, 80.0};
  double expected = 0.0;
  for (double v : y) expected += 56.25 * std::log(0.75) - std::lgamma(56.25) + 55.25 * std::log(v) - 0.75 * v;
  EXPECT_NEAR(c.log_density(y), expected, 1e-10);
  EXPECT_EQ(c.log_density(Point{0.0, 80.0}), kNegInf);
  EXPECT_EQ(c.log_density(Point{-3.0, 80.0}), kNegInf);
  EXPECT_THROW(prepare_component(ProposalKernel::gamma(1.0), Point{0.0, 1.0}, t), ProposalError);
}

TEST(ProposalKernel, GammaDensityIntegratesToOne) {
  const auto t = make_chemical_target(default_chemical_model());
  std::vector<double> gx, gw;
  gauss_legendre(16, gx, gw);
  for (double beta : {1.0, 10.0, 30.0}) {
    const auto c = prepare_component(ProposalKernel::gamma(beta), Point{75.0, 120.0}, t);
    // Integrate over (0, 800]^2 in 200 x 200 cells; the tails beyond are negligible.
    const std::size_t cells = 200;
    const double h = 800.0 / cells;
    double s = 0.0;
    Point y(2);
    for (std::size_t a = 0; a < cells; ++a)
      for (std::size_t q = 0; q < gx.size(); ++q) {
        y[0] = h * (a + 0.5 * (gx[q] + 1));
        for (std::size_t b = 0; b < cells; ++b)
          for (std::size_t r = 0; r < gx.size(); ++r) {
            y[1] = h * (b + 0.5 * (gx[r] + 1));
            s += gw[q] * gw[r] * std::exp(c.log_density(y));
          }
      }
    EXPECT_NEAR(0.25 * h * h * s, 1.0, 1e-6) << beta;
  }
}

TEST(ProposalKernel, RwDensityIntegratesToOne) {
  const auto t = make_gaussian_target(1, 1, 0, grid_1d(-1, 1, 2));
  std::vector<double> gx, gw;
  gauss_legendre(16, gx, gw);
  const auto c = prepare_component(ProposalKernel::rw_gaussian(0.3), Point{0.4}, t);
  double s = 0.0;
  const double lo = -5.0, h = 0.05;
  for (int a = 0; a < 200; ++a)
    for (std::size_t q = 0; q < gx.size(); ++q) {
      const Point y{lo + h * (a + 0.5 * (gx[q] + 1))};
      s += 0.5 * h * gw[q] * std::exp(c.log_density(y));
    }
  EXPECT_NEAR(s, 1.0, 1e-9);
}

namespace {

// Histogram of n draws against exact bin integrals of exp(log_density).
double kernel_self_consistency(const KernelComponent& c, const GridSpec& grid, std::size_t n, std::uint64_t seed) {
  RandomStream rng(seed);
  HistogramAccumulator acc(grid);
  Point y(grid.dim());
  for (std::size_t i = 0; i < n; ++i) {
    c.sample(rng, y);
    acc.add(y);
  }
  AnalyticReference ref;
  ref.grid = grid;
  ref.bin_mass.assign(grid.total_bins(), 0.0);
  std::vector<double> gx, gw;
  gauss_legendre(6, gx, gw);
  for (std::size_t b = 0; b < grid.total_bins(); ++b) {
    const auto idx = grid.unflatten(b);
    double s = 0.0;
    if (grid.dim() == 1) {
      const double a = grid.bin_lower(0, idx[0]), h = grid.width(0);
      for (std::size_t q = 0; q < gx.size(); ++q)
        s += 0.5 * h * gw[q] * std::exp(c.log_density(Point{a + 0.5 * h * (gx[q] + 1)}));
    } else {
      const double a0 = grid.bin_lower(0, idx[0]), a1 = grid.bin_lower(1, idx[1]);
      const double h0 = grid.width(0), h1 = grid.width(1);
      for (std::size_t q = 0; q < gx.size(); ++q)
        for (std::size_t r = 0; r < gx.size(); ++r)
          s += 0.25 * h0 * h1 * gw[q] * gw[r] *
               std::exp(c.log_density(Point{a0 + 0.5 * h0 * (gx[q] + 1), a1 + 0.5 * h1 * (gx[r] + 1)}));
    }
    ref.bin_mass[b] = s;
  }
  // Compare against the histogram rescaled to total (not in-range) mass.
  HistogramGrid h = acc.snapshot();
  for (double& d : h.density) d *= 1.0 - h.out_of_range_mass;
  return relative_l2_error(h, ref);
}

}  // namespace

TEST(ProposalKernel, SamplesMatchDensity) {
  const auto chem = make_chemical_target(default_chemical_model());
  const auto gauss2 = make_gaussian_target(1, 1, 0, grid_1d(-1, 1, 2));
  EXPECT_LT(kernel_self_consistency(prepare_component(ProposalKernel::gamma(10.0), Point{75.0, 40.0}, chem),
                                    grid_2d(0, 150, 30, 0, 100, 30), 1000000, 3),
            0.02);
  const auto la = prepare_component(ProposalKernel::gamma_langevin(1.0), Point{60.0, 110.0}, chem);
  const Point& m = la.location();
  EXPECT_LT(kernel_self_consistency(la, grid_2d(m[0] - 5, m[0] + 5, 20, m[1] - 5, m[1] + 5, 20), 1000000, 4), 0.02);
  EXPECT_LT(kernel_self_consistency(prepare_component(ProposalKernel::rw_gaussian(0.5), Point{1.0}, gauss2),
                                    grid_1d(-1, 3, 80), 1000000, 5),
            0.02);
}

TEST(ProposalKernel, CorrelatedRwMatchesDensity) {
  TargetPosterior t;
  t.dim = 2;
  t.support = {Bounds{}, Bounds{}};
  const auto c = prepare_component(ProposalKernel::rw_gaussian(0.7, {2.0, 0.8, 0.8, 1.0}), Point{0.0, 1.0}, t);
  EXPECT_LT(kernel_self_consistency(c, grid_2d(-3, 3, 30, -1.5, 3.5, 30), 1000000, 6), 0.02);
}

TEST(ProposalKernel, LangevinDriftVanishesAsBetaShrinks) {
  const auto t = make_chemical_target(default_chemical_model());
  const Point x{70.0, 130.0};
  const auto c = prepare_component(ProposalKernel::gamma_langevin(1e-6), x, t);
  EXPECT_NEAR(c.location()[0], x[0], 1e-9);
  EXPECT_NEAR(c.location()[1], x[1], 1e-9);
  const auto d = prepare_component(ProposalKernel::gamma_langevin(1.0), x, t);
  const Point g = t.gradient(x);
  EXPECT_DOUBLE_EQ(d.location()[0], x[0] + 0.5 * g[0]);
  EXPECT_DOUBLE_EQ(d.location()[1], x[1] + 0.5 * g[1]);
  EXPECT_EQ(d.drift_fallbacks(), 0u);
}

TEST(ProposalKernel, LangevinFallsBackWhenMeanIsNonpositive) {
  const auto t = make_chemical_target(default_chemical_model());
  Point x, g;
  bool found = false;
  for (double a = 50.0; a <= 400.0 && !found; a += 10.0)
    for (double b = 50.0; b <= 400.0 && !found; b += 10.0) {
      x = {a, b};
      g = t.gradient(x);
      found = g[0] < 0.0 && g[1] < 0.0;
    }
  ASSERT_TRUE(found);
  const double beta = std::sqrt(2.0 * (std::max(x[0], x[1]) + 10.0) / -std::max(g[0], g[1]));
  const auto c = prepare_component(ProposalKernel::gamma_langevin(beta), x, t);
  EXPECT_EQ(c.drift_fallbacks(), 2u);
  EXPECT_EQ(c.location(), x);
  EXPECT_TRUE(std::isfinite(c.log_density(Point{250.0, 310.0})));
}

TEST(Mixture, SingleComponentAndCollapsedEnsemble) {
  const auto t = make_gaussian_target(1, 1, 0, grid_1d(-1, 1, 2));
  const auto k = ProposalKernel::rw_gaussian(0.8);
  const Point y{0.3};
  const double single = log_kernel_density(k, y, Point{1.1}, t);
  std::vector<KernelComponent> one{prepare_component(k, Point{1.1}, t)};
  EXPECT_DOUBLE_EQ(mixture_log_density(one, y), single);
  std::vector<KernelComponent> same(7, one[0]);
  EXPECT_NEAR(mixture_log_density(same, y), single, 1e-15);
}

TEST(Mixture, TwoGaussiansExample) {
  const auto t = make_gaussian_target(1, 1, 0, grid_1d(-1, 1, 2));
  std::vector<KernelComponent> c{prepare_component(ProposalKernel::rw_gaussian(1.0), Point{0.0}, t),
                                 prepare_component(ProposalKernel::rw_gaussian(1.0), Point{1.0}, t)};
  const double v = std::exp(mixture_log_density(c, Point{0.5}));
  EXPECT_NEAR(v, std::exp(-0.125) / std::sqrt(2 * std::numbers::pi), 1e-15);
  EXPECT_NEAR(v, 0.352065, 1e-6);
}

TEST(Mixture, LowerBoundedByDominantComponent) {
  const auto t = make_gaussian_target(1, 1, 0, grid_1d(-1, 1, 2));
  RandomStream rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<KernelComponent> c;
    const std::size_t m = 1 + trial % 9;
    for (std::size_t j = 0; j < m; ++j)
      c.push_back(prepare_component(ProposalKernel::rw_gaussian(0.01 + rng.uniform()), Point{20 * rng.uniform() - 10}, t));
    const Point y{30 * rng.uniform() - 15};
    double mx = kNegInf;
    for (const auto& k : c) mx = std::max(mx, k.log_density(y));
    EXPECT_GE(mixture_log_density(c, y), mx - std::log(static_cast<double>(m)));
  }
  std::vector<KernelComponent> far{prepare_component(ProposalKernel::rw_gaussian(0.01), Point{0.0}, t),
                                   prepare_component(ProposalKernel::rw_gaussian(0.01), Point{100.0}, t)};
  EXPECT_DOUBLE_EQ(mixture_log_density(far, Point{0.0}), far[0].log_density(Point{0.0}) - std::log(2.0));
}

TEST(Weights, ProportionalProposalGivesConstantWeight) {
  const auto t = make_gaussian_target(0.01, 0.01, 4.0);
  std::vector<KernelComponent> c{prepare_component(ProposalKernel::rw_gaussian(std::sqrt(0.005)), Point{2.0}, t)};
  const auto Y = PointSet::from_rows({{1.9}, {2.0}, {2.3}, {1.5}});
  const auto lw = compute_weights(t, Y, c);
  for (double l : lw) EXPECT_NEAR(l, lw[0], 1e-9);
  EXPECT_NEAR(lw[0], gaussian_log_normalizer(0.01, 0.01, 4.0), 1e-9);
}

TEST(Weights, OutOfSupportProposalHasZeroWeight) {
  const auto t = make_chemical_target(default_chemical_model());
  const auto X = PointSet::from_rows({{50, 100}, {60, 110}, {45, 95}});
  std::vector<ProposalKernel> k(3, ProposalKernel::rw_gaussian(5.0));
  const auto c = prepare_components(k, X, t);
  const auto Y = PointSet::from_rows({{52, 101}, {-1, 100}, {47, 96}});
  const auto lw = compute_weights(t, Y, c);
  EXPECT_EQ(lw[1], kNegInf);
  const auto w = normalize_log_weights(lw);
  EXPECT_EQ(w[1], 0.0);
  EXPECT_NEAR(w[0] + w[2], 1.0, 1e-12);
}

TEST(Weights, NormalizedSumIsOne) {
  RandomStream rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> lw(50);
    for (auto& l : lw) l = 2000.0 * rng.uniform() - 1000.0;
    if (trial % 3 == 0) lw[trial % 50] = kNegInf;
    double s = 0.0;
    for (double w : normalize_log_weights(lw)) {
      EXPECT_GE(w, 0.0);
      s += w;
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(Weights, OneIterationEstimatesPosteriorMean) {
  const auto t = make_gaussian_target(0.01, 0.01, 4.0);
  const std::size_t m = 50;
  PointSet X(m, 1);
  RandomStream init(21);
  for (std::size_t j = 0; j < m; ++j) X[j][0] = 2.0 + std::sqrt(0.005) * std::normal_distribution<double>()(init);
  std::vector<ProposalKernel> k(m, ProposalKernel::rw_gaussian(4.7e-2));
  const auto c = prepare_components(k, X, t);
  PointSet Y(m, 1);
  for (std::size_t j = 0; j < m; ++j) {
    RandomStream r(21, stream_tag::propose, 0, j);
    c[j].sample(r, Y[j]);
  }
  const auto lw = compute_weights(t, Y, c);
  const double mean = weighted_moment(Y, lw, 0, 1);
  const double se = std::sqrt(0.005 / ess_log(lw));
  EXPECT_LT(std::abs(mean - 2.0), 5.0 * se);
}

// Along k = c (1, 1) the likelihood is constant, so the tail of log w is set by
// the prior rate beta0 against the lightest kernel tail min_j m_j / beta^2.
TEST(Weights, HeavyTailContainmentCondition) {
  const auto model = default_chemical_model();
  const auto t = make_chemical_target(model);
  const auto X = PointSet::from_rows({{50, 100}, {70, 130}, {40, 90}, {55, 105}});
  auto tail = [&](double beta) {
    std::vector<ProposalKernel> k(X.size(), ProposalKernel::gamma(beta));
    const auto c = prepare_components(k, X, t);
    double min_rate = kInf;
    for (const auto& comp : c)
      for (double m : comp.location()) min_rate = std::min(min_rate, m / (beta * beta));
    std::vector<double> lw;
    for (double s : {1e2, 1e3, 1e4}) lw.push_back(compute_weights(t, PointSet::from_rows({{s, s}}), c)[0]);
    return std::pair{min_rate, lw};
  };
  {
    const auto [rate, lw] = tail(12.0);
    ASSERT_LT(rate, model.beta0);
    EXPECT_GE(lw[0], lw[1]);
    EXPECT_GE(lw[1], lw[2]);
  }
  {
    const auto [rate, lw] = tail(1.0);
    ASSERT_GT(rate, model.beta0);
    EXPECT_LT(lw[0], lw[1]);
    EXPECT_LT(lw[1], lw[2]);
  }
}
