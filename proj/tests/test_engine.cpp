#include <gtest/gtest.h>

#include <boost/math/special_functions/gamma.hpp>

#include "test_support.hpp"

using namespace pais;

namespace {

SamplerSettings gaussian_settings(std::size_t m, std::size_t n, double beta) {
  SamplerSettings s;
  s.ensemble_size = m;
  s.iterations = n;
  s.kernel.kernel = ProposalKernel::rw_gaussian(beta);
  s.seed = 17;
  return s;
}

void expect_same_output(const SamplerOutput& a, const SamplerOutput& b) {
  EXPECT_EQ(a.samples, b.samples);
  EXPECT_EQ(a.log_weights.size(), b.log_weights.size());
  for (std::size_t i = 0; i < a.log_weights.size(); ++i) ASSERT_EQ(a.log_weights[i], b.log_weights[i]) << i;
  EXPECT_EQ(a.final_states, b.final_states);
  EXPECT_EQ(a.beta_trace, b.beta_trace);
  EXPECT_EQ(a.burn_in, b.burn_in);
  EXPECT_EQ(a.acceptance_per_chain, b.acceptance_per_chain);
  ASSERT_EQ(a.diagnostics.size(), b.diagnostics.size());
  for (std::size_t i = 0; i < a.diagnostics.size(); ++i) {
    EXPECT_EQ(a.diagnostics[i].ess, b.diagnostics[i].ess);
    EXPECT_EQ(a.diagnostics[i].weight_variance, b.diagnostics[i].weight_variance);
  }
}

// Gamma(5, 1) on (0, inf) with an analytic CDF.
TargetPosterior gamma_target() {
  TargetPosterior t;
  t.name = "gamma5";
  t.dim = 1;
  t.support = {Bounds{0.0, kInf}};
  t.unnormalized_log_density = [](std::span<const double> x) { return 4.0 * std::log(x[0]) - x[0]; };
  t.gradient_fn = [](std::span<const double> x) { return Point{4.0 / x[0] - 1.0}; };
  t.log_prior = t.unnormalized_log_density;
  t.sample_prior = [](RandomStream& r) { return Point{std::gamma_distribution<double>(5.0, 1.0)(r)}; };
  return t;
}

}  // namespace

TEST(PaisStep, ProportionalIndependenceProposal) {
  const auto t = make_gaussian_target(0.01, 0.01, 4.0);
  const PointSet x = PointSet::from_rows({{2.0}});
  const std::vector<ProposalKernel> k{ProposalKernel::rw_gaussian(std::sqrt(0.005))};
  double first = kNaN;
  for (std::size_t i = 0; i < 20; ++i) {
    const auto r = pais_step(x, k, t, {}, 3, i);
    if (i == 0) first = r.log_weights[0];
    EXPECT_NEAR(r.log_weights[0], first, 1e-9);
    EXPECT_EQ(r.record.ess, 1.0);
    EXPECT_EQ(r.next, r.proposals);
  }
}

TEST(PaisStep, CollapsedEnsembleStaysInHull) {
  const auto t = make_gaussian_target(0.01, 0.01, 4.0);
  PointSet x(30, 1);
  for (std::size_t j = 0; j < 30; ++j) x[j][0] = 1.5;
  const auto k = slot_kernels({ProposalKernel::rw_gaussian(0.1)}, 30);
  for (auto kind : {ResamplerKind::etpf, ResamplerKind::amr}) {
    const auto r = pais_step(x, k, t, {kind, false}, 5, 0);
    double lo = kInf, hi = kNegInf;
    for (std::size_t j = 0; j < 30; ++j) {
      lo = std::min(lo, r.proposals[j][0]);
      hi = std::max(hi, r.proposals[j][0]);
    }
    for (std::size_t j = 0; j < 30; ++j) {
      EXPECT_GE(r.next[j][0], lo - 1e-12);
      EXPECT_LE(r.next[j][0], hi + 1e-12);
    }
  }
}

TEST(PaisStep, AllWeightsZeroNamesIteration) {
  TargetPosterior t = gamma_target();
  const PointSet x = PointSet::from_rows({{-100.0}, {-90.0}});
  const auto k = slot_kernels({ProposalKernel::rw_gaussian(1.0)}, 2);
  try {
    pais_step(x, k, t, {}, 1, 7);
    FAIL() << "expected IterationError";
  } catch (const IterationError& e) {
    EXPECT_EQ(e.iteration, 7u);
    EXPECT_NE(std::string(e.what()).find("iteration 7"), std::string::npos);
  }
}

TEST(PaisStep, ProposalDependsOnlyOnOwnStateAndStream) {
  const auto t = make_gaussian_target(0.01, 0.01, 4.0);
  auto x = PointSet::from_rows({{1.0}, {2.0}, {1.1}});
  const auto k = slot_kernels({ProposalKernel::rw_gaussian(0.2)}, 3);
  const auto a = pais_step(x, k, t, {}, 9, 4);
  x[2][0] = 5.0;
  const auto b = pais_step(x, k, t, {}, 9, 4);
  EXPECT_EQ(a.proposals[0][0], b.proposals[0][0]);
  EXPECT_EQ(a.proposals[1][0], b.proposals[1][0]);
  EXPECT_NE(a.proposals[2][0], b.proposals[2][0]);
  EXPECT_NE(a.log_weights[0], b.log_weights[0]);  // the mixture sees the whole ensemble
}

TEST(RunPais, ZeroIterationsEchoesInitialEnsemble) {
  const auto t = make_gaussian_target(0.01, 0.01, 4.0);
  auto s = gaussian_settings(10, 0, 0.05);
  int calls = 0;
  const auto out = run_pais(t, s, [&](const IterationBatch&) { ++calls; });
  EXPECT_EQ(calls, 0);
  EXPECT_TRUE(out.samples.empty());
  EXPECT_EQ(out.final_states, out.initial_states);
  EXPECT_EQ(out.initial_states.size(), 10u);
}

TEST(RunPais, StreamLengthAndSink) {
  const auto t = make_gaussian_target(0.01, 0.01, 4.0);
  auto s = gaussian_settings(12, 40, 0.05);
  std::size_t seen = 0;
  const auto out = run_pais(t, s, [&](const IterationBatch& b) {
    EXPECT_EQ(b.iteration, seen);
    EXPECT_EQ(b.samples.size(), 12u);
    ++seen;
  });
  EXPECT_EQ(seen, 40u);
  EXPECT_EQ(out.samples.size(), 40u * 12u);
  EXPECT_EQ(out.log_weights.size(), 40u * 12u);
  EXPECT_EQ(out.iterations(), 40u);
}

TEST(RunPais, DeterministicAcrossRunsAndThreadCounts) {
  const auto t = make_bimodal_target(0.25, 0.1, 2.0);
  for (auto kind : {ResamplerKind::etpf, ResamplerKind::amr, ResamplerKind::bootstrap}) {
    auto s = gaussian_settings(20, 60, 0.3);
    s.resampler.kind = kind;
    s.kernel.scout_count = 2;
    const auto a = run_pais(t, s);
    const auto b = run_pais(t, s);
    s.threads = 4;
    const auto c = run_pais(t, s);
    expect_same_output(a, b);
    expect_same_output(a, c);
  }
  auto s = gaussian_settings(20, 200, 1.0);
  s.adaptation.enabled = true;
  s.adaptation.n0 = 20;
  const auto a = run_pais(t, s);
  s.threads = 3;
  expect_same_output(a, run_pais(t, s));
  s.seed = 18;
  EXPECT_NE(a.samples, run_pais(t, s).samples);
}

TEST(RunPais, GaussianPosteriorShortRun) {
  const auto t = make_gaussian_target(0.01, 0.01, 4.0);
  const auto out = run_pais(t, gaussian_settings(50, 2000, 4.7e-2));
  ASSERT_TRUE(out.burn_in);
  const auto y = out.pooled_samples();
  const auto lw = out.pooled_log_weights();
  const double mean = weighted_moment(y, lw, 0, 1);
  const double var = weighted_moment(y, lw, 0, 2) - mean * mean;
  EXPECT_NEAR(mean, 2.0, 0.01);
  EXPECT_NEAR(var, 0.005, 0.0005);
  for (const auto& r : out.diagnostics) EXPECT_EQ(r.burned_in, r.iteration >= *out.burn_in);
}

TEST(RunPais, ScoutsOccupyFirstSlots) {
  const auto k = slot_kernels({ProposalKernel::rw_gaussian(0.1), 3, 10.0}, 8);
  for (std::size_t j = 0; j < 8; ++j) EXPECT_DOUBLE_EQ(k[j].beta, j < 3 ? 1.0 : 0.1);
  const auto g = slot_kernels({ProposalKernel::rw_gaussian(0.1), 1, 10.0}, 4,
                              [](std::size_t grp) { return grp == 0 ? 0.5 : 2.0; });
  EXPECT_DOUBLE_EQ(g[0].beta, 5.0);
  EXPECT_DOUBLE_EQ(g[1].beta, 2.0);
  EXPECT_DOUBLE_EQ(g[2].beta, 0.5);
}

TEST(RunPais, SettingsValidation) {
  const auto t = make_gaussian_target(0.01, 0.01, 4.0);
  auto s = gaussian_settings(5, 10, 0.1);
  s.kernel.scout_count = 5;
  EXPECT_THROW(run_pais(t, s), ParameterError);
  s = gaussian_settings(0, 10, 0.1);
  EXPECT_THROW(run_pais(t, s), ParameterError);
  s = gaussian_settings(5, 10, 0.1);
  s.adaptation.enabled = true;
  s.adaptation.beta_lo = 3.0;
  EXPECT_THROW(run_pais(t, s), ParameterError);
  s = gaussian_settings(5, 10, 0.1);
  s.initial_states = PointSet(4, 1);
  EXPECT_THROW(run_pais(t, s), ParameterError);
}

TEST(Adaptation, ScheduleGapsStrictlyIncrease) {
  for (auto [n0, g] : {std::pair{50u, 1.5}, {1u, 1.01}, {7u, 3.0}, {2u, 1.2}}) {
    const auto ends = adaptation_schedule(n0, g, 100000);
    ASSERT_GE(ends.size(), 3u);
    EXPECT_EQ(ends[0], n0);
    for (std::size_t k = 2; k < ends.size(); ++k) EXPECT_GT(ends[k] - ends[k - 1], ends[k - 1] - ends[k - 2]);
  }
  const auto e = adaptation_schedule(50, 1.5, 1000);
  EXPECT_EQ(e, (std::vector<std::size_t>{50, 75, 112, 168, 253, 379, 569, 854}));
}

TEST(Adaptation, GoldenSectionFindsSyntheticOptimum) {
  const double target = 0.05;
  auto score = [&](double log_b) {
    const double d = log_b - std::log(target);
    return std::exp(-d * d);
  };
  BetaBracket b = BetaBracket::from_bounds(1e-5, 2.0);
  int epochs = 0;
  while (!b.converged && epochs < 12) {
    b = adapt_beta(b, score(b.lower_point()), score(b.upper_point()), 0.1);
    ++epochs;
  }
  EXPECT_LE(epochs, 12);
  EXPECT_LT(std::abs(std::exp(b.centre()) / target - 1.0), 0.25);
}

TEST(Adaptation, ConstantScoreStaysInGoldenInterior) {
  const BetaBracket init = BetaBracket::from_bounds(1e-5, 2.0);
  BetaBracket b = init;
  for (int k = 0; k < 40; ++k) {
    b = adapt_beta(b, 1.0, 1.0, 1e-6);
    EXPECT_GE(b.log_lo, init.lower_point() - 1e-12);
    EXPECT_LE(b.log_hi, init.upper_point() + 1e-12);
    EXPECT_NEAR(b.centre(), init.centre(), 1e-9);
  }
}

TEST(Adaptation, BetaChangesOnlyAtScheduledEpochs) {
  const auto t = make_gaussian_target(0.01, 0.01, 4.0);
  auto s = gaussian_settings(50, 2000, 1.0);
  s.adaptation.enabled = true;
  const auto out = run_pais(t, s);
  const auto sched = adaptation_schedule(50, 1.5, 2000);
  for (std::size_t c : out.adaptation_changes) EXPECT_TRUE(std::find(sched.begin(), sched.end(), c) != sched.end());
  for (std::size_t i = 1; i < out.beta_trace.size(); ++i)
    if (out.beta_trace[i] != out.beta_trace[i - 1]) {
      EXPECT_TRUE(std::find(out.adaptation_changes.begin(), out.adaptation_changes.end(), i) !=
                  out.adaptation_changes.end())
          << i;
    }
  for (std::size_t i = 0; i < 50; ++i) EXPECT_EQ(out.beta_trace[i], 1.0);
  EXPECT_GE(out.final_beta, 2e-2);
  EXPECT_LE(out.final_beta, 1.2e-1);
}

TEST(Mh, UphillProposalsAlwaysAccepted) {
  TargetPosterior t;
  t.dim = 1;
  t.support = {Bounds{}};
  t.unnormalized_log_density = [](std::span<const double> x) { return x[0]; };
  PointSet x(200, 1);
  const auto k = slot_kernels({ProposalKernel::rw_gaussian(1.0)}, 200);
  const auto r = mh_step(x, k, t, 4, 0);
  for (std::size_t j = 0; j < 200; ++j) {
    RandomStream rng(4, stream_tag::propose, 0, j);
    Point y(1);
    prepare_component(k[j], x[j], t).sample(rng, y);
    if (y[0] >= 0.0) {
      EXPECT_EQ(r.accepted[j], 1);
      EXPECT_EQ(r.next[j][0], y[0]);
    }
  }
}

TEST(Mh, AcceptanceAtPublishedBeta) {
  const auto t = make_gaussian_target(0.01, 0.01, 4.0);
  auto s = gaussian_settings(50, 4000, 0.15);
  s.sampler = SamplerKind::mh;
  const auto out = run_mh(t, s);
  EXPECT_NEAR(acceptance_rate(out), 0.5, 0.05);
  EXPECT_EQ(out.burn_in, 400u);
}

TEST(Mh, AdaptationSteersTowardTargetAcceptance) {
  const auto t = make_gaussian_target(0.01, 0.01, 4.0);
  auto s = gaussian_settings(50, 6000, 1.0);
  s.sampler = SamplerKind::mh;
  s.adaptation.enabled = true;
  const auto out = run_mh(t, s);
  EXPECT_GE(out.final_beta, 0.08);
  EXPECT_LE(out.final_beta, 0.3);
  std::size_t acc = 0, n = 0;
  for (std::size_t i = 5000; i < 6000; ++i, n += 50) acc += *out.diagnostics[i].acceptance_count;
  EXPECT_NEAR(static_cast<double>(acc) / static_cast<double>(n), 0.5, 0.1);
}

TEST(Mh, GaussianPosteriorLongRun) {
  const auto t = make_gaussian_target(0.01, 0.01, 4.0);
  auto s = gaussian_settings(50, 100000, 0.15);
  s.sampler = SamplerKind::mh;
  s.store_samples = false;
  double sw = 0, s1 = 0, s2 = 0;
  std::size_t skip = 10000;
  run_mh(t, s, [&](const IterationBatch& b) {
    if (b.iteration < skip) return;
    for (std::size_t j = 0; j < b.samples.size(); ++j) {
      const double v = b.samples[j][0];
      sw += 1;
      s1 += v;
      s2 += v * v;
    }
  });
  const double mean = s1 / sw, var = s2 / sw - mean * mean;
  EXPECT_NEAR(mean, 2.0, 0.02);
  EXPECT_NEAR(var, 0.005, 0.05 * 0.005);
}

// Lump the state space into three bins; at stationarity the empirical flow
// between bins is symmetric and bin occupancy matches the target mass. The
// Gamma kernel is not symmetric, so this exercises the Hastings correction.
TEST(Mh, DetailedBalanceOnLumpedStates) {
  const auto t = gamma_target();
  const double cut1 = 4.0, cut2 = 6.0;
  auto bin = [&](double v) { return v < cut1 ? 0 : (v < cut2 ? 1 : 2); };
  auto s = gaussian_settings(100, 10000, 1.5);
  s.sampler = SamplerKind::mh;
  s.kernel.kernel = ProposalKernel::gamma(1.5);
  s.store_samples = false;
  PointSet init(100, 1);
  for (std::size_t j = 0; j < 100; ++j) {
    RandomStream r(99, 0, j);
    init[j][0] = std::gamma_distribution<double>(5.0, 1.0)(r);
  }
  s.initial_states = init;
  std::array<std::array<double, 3>, 3> flow{};
  std::array<double, 3> occupancy{};
  PointSet prev = init;
  double steps = 0;
  run_mh(t, s, [&](const IterationBatch& b) {
    for (std::size_t j = 0; j < 100; ++j) {
      flow[bin(prev[j][0])][bin(b.samples[j][0])] += 1;
      occupancy[bin(b.samples[j][0])] += 1;
      steps += 1;
    }
    prev = b.samples;
  });
  for (int a = 0; a < 3; ++a)
    for (int c = a + 1; c < 3; ++c) EXPECT_NEAR(flow[a][c] / steps, flow[c][a] / steps, 1e-2) << a << c;
  const double p0 = boost::math::gamma_p(5.0, cut1), p1 = boost::math::gamma_p(5.0, cut2) - p0;
  EXPECT_NEAR(occupancy[0] / steps, p0, 1e-2);
  EXPECT_NEAR(occupancy[1] / steps, p1, 1e-2);
  EXPECT_NEAR(occupancy[2] / steps, 1.0 - p0 - p1, 1e-2);
}

TEST(Mh, DeterministicAcrossThreadCounts) {
  const auto t = make_chemical_target(pais::testing::default_chemical_model());
  auto s = gaussian_settings(8, 50, 1.0);
  s.sampler = SamplerKind::mh;
  s.kernel.kernel = ProposalKernel::gamma(1.0);
  const auto a = run_mh(t, s);
  s.threads = 4;
  expect_same_output(a, run_mh(t, s));
}

TEST(Mh, RejectsStartOutsideSupport) {
  auto s = gaussian_settings(2, 5, 1.0);
  s.sampler = SamplerKind::mh;
  s.initial_states = PointSet::from_rows({{1.0}, {-1.0}});
  EXPECT_THROW(run_mh(gamma_target(), s), ParameterError);
}
