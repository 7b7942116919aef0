#pragma once

#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pais/core.hpp"
#include "pais/diagnostics.hpp"
#include "pais/kernels.hpp"
#include "pais/resamplers.hpp"
#include "pais/targets.hpp"

namespace pais {

// ---------------------------------------------------------------------------
// Settings

enum class SamplerKind { pais, mh };

inline std::string_view to_string(SamplerKind k) { return k == SamplerKind::pais ? "pais" : "mh"; }

inline SamplerKind sampler_kind_from_string(std::string_view s) {
  if (s == "pais") return SamplerKind::pais;
  if (s == "mh") return SamplerKind::mh;
  throw ParameterError("unknown sampler '" + std::string(s) + "'");
}

/// Base kernel plus scout chains. Scouts occupy the first `scout_count` slots
/// and use beta * scout_multiplier.
struct KernelSpec {
  ProposalKernel kernel;
  std::size_t scout_count = 0;
  double scout_multiplier = 10.0;

  friend bool operator==(const KernelSpec& a, const KernelSpec& b) {
    return a.kernel.kind == b.kernel.kind && a.kernel.beta == b.kernel.beta &&
           a.kernel.covariance == b.kernel.covariance && a.scout_count == b.scout_count &&
           a.scout_multiplier == b.scout_multiplier;
  }
};

struct AdaptationSpec {
  bool enabled = false;
  /// Epoch ends n_k = n0 * growth^k.
  std::size_t n0 = 50;
  double growth = 1.5;
  double beta_lo = 1e-5;
  double beta_hi = 2.0;
  /// Stop once log(hi / lo) falls below this.
  double resolution = 0.1;
  /// Applied to the converged beta.
  double overdispersion = 1.1;
  /// Acceptance rate targeted by MH adaptation.
  double target_acceptance = 0.5;

  friend bool operator==(const AdaptationSpec&, const AdaptationSpec&) = default;
};

enum class BurnInMode { automatic, fixed, none };

struct BurnInSpec {
  /// automatic: ESS plateau for PAIS, N/10 for MH.
  BurnInMode mode = BurnInMode::automatic;
  std::size_t iterations = 0;  // fixed mode
  std::size_t window = 20;
  double slope_fraction = 0.01;
  double rise_fraction = 0.1;

  friend bool operator==(const BurnInSpec&, const BurnInSpec&) = default;
};

struct SamplerSettings {
  SamplerKind sampler = SamplerKind::pais;
  std::size_t ensemble_size = 50;
  std::size_t iterations = 1000;
  KernelSpec kernel;
  ResamplerSpec resampler;
  AdaptationSpec adaptation;
  BurnInSpec burn_in;
  std::uint64_t seed = 1;
  std::size_t threads = 1;
  /// Explicit initial ensemble; drawn from the prior when absent.
  std::optional<PointSet> initial_states;
  /// Keep every (Y, W) pair in SamplerOutput.
  bool store_samples = true;

  void validate(std::size_t dim) const {
    if (ensemble_size < 1) throw ParameterError("ensemble size must be >= 1");
    if (kernel.scout_count >= ensemble_size && kernel.scout_count > 0)
      throw ParameterError("scout count must be smaller than the ensemble size");
    if (!(kernel.scout_multiplier > 0.0)) throw ParameterError("scout multiplier must be > 0");
    kernel.kernel.validate(dim);
    if (adaptation.enabled) {
      if (ensemble_size < 2) throw ParameterError("adaptation needs at least two ensemble members");
      if (!(adaptation.beta_lo > 0.0) || !(adaptation.beta_hi > adaptation.beta_lo))
        throw ParameterError("adaptation bounds must satisfy 0 < beta_lo < beta_hi");
      if (!(adaptation.growth > 1.0)) throw ParameterError("adaptation growth factor must be > 1");
      if (adaptation.n0 < 1) throw ParameterError("adaptation n0 must be >= 1");
      if (!(adaptation.resolution > 0.0)) throw ParameterError("adaptation resolution must be > 0");
      if (!(adaptation.overdispersion > 0.0)) throw ParameterError("overdispersion factor must be > 0");
    }
    if (burn_in.window < 2) throw ParameterError("burn-in window must be >= 2");
    if (initial_states) {
      if (initial_states->size() != ensemble_size || initial_states->dim() != dim)
        throw ParameterError("initial states must be ensemble_size points of the target dimension");
    }
  }
};

// ---------------------------------------------------------------------------
// Output

struct IterationBatch {
  std::size_t iteration;
  const PointSet& samples;
  std::span<const double> log_weights;
  const DiagnosticsRecord& record;
};

/// Receives each iteration's (Y, W) batch as soon as it is complete.
using SampleSink = std::function<void(const IterationBatch&)>;

struct SamplerOutput {
  std::size_t ensemble_size = 0;
  PointSet initial_states;
  PointSet final_states;
  /// Iteration-major: rows [i*M, (i+1)*M) belong to iteration i.
  PointSet samples;
  std::vector<double> log_weights;
  std::vector<DiagnosticsRecord> diagnostics;
  std::vector<double> beta_trace;
  /// Iterations at which the adapted beta changed.
  std::vector<std::size_t> adaptation_changes;
  std::optional<std::size_t> burn_in;
  std::vector<std::size_t> acceptance_per_chain;
  double final_beta = kNaN;
  bool adaptation_converged = false;
  std::size_t drift_fallbacks = 0;
  double wall_seconds = 0.0;

  std::size_t iterations() const noexcept { return diagnostics.size(); }

  /// First iteration used by pooled estimates.
  std::size_t first_kept() const noexcept { return std::min(burn_in.value_or(0), iterations()); }

  /// Post-burn-in samples of iterations [from, to).
  PointSet pooled_samples(std::size_t from, std::size_t to) const {
    return samples.slice(from * ensemble_size, to * ensemble_size);
  }
  std::span<const double> pooled_log_weights(std::size_t from, std::size_t to) const {
    return std::span<const double>(log_weights).subspan(from * ensemble_size, (to - from) * ensemble_size);
  }
  PointSet pooled_samples() const { return pooled_samples(first_kept(), iterations()); }
  std::span<const double> pooled_log_weights() const { return pooled_log_weights(first_kept(), iterations()); }
};

// ---------------------------------------------------------------------------
// Burn-in

/// End-exclusive index of the first trailing window whose least-squares slope
/// satisfies |slope| < slope_fraction * M, once the series has risen by
/// rise_fraction * M above its first value. The rise requirement is dropped
/// when the whole series never rises that far.
inline std::optional<std::size_t> detect_burn_in(std::span<const double> series, double ensemble_size,
                                                 std::size_t window = 20, double slope_fraction = 0.01,
                                                 double rise_fraction = 0.1) {
  if (window < 2 || series.size() < window) return std::nullopt;
  const double start = series[0];
  const double rise = rise_fraction * ensemble_size;
  double global_max = start;
  for (double v : series) global_max = std::max(global_max, v);
  const bool waived = global_max - start < rise;

  const double n = static_cast<double>(window);
  const double tbar = (n - 1.0) / 2.0;
  double stt = 0.0;
  for (std::size_t k = 0; k < window; ++k) stt += (static_cast<double>(k) - tbar) * (static_cast<double>(k) - tbar);

  double running_max = start;
  for (std::size_t k = 0; k + 1 < window; ++k) running_max = std::max(running_max, series[k]);
  for (std::size_t end = window; end <= series.size(); ++end) {
    running_max = std::max(running_max, series[end - 1]);
    if (!waived && running_max - start < rise) continue;
    double mean = 0.0;
    for (std::size_t k = end - window; k < end; ++k) mean += series[k];
    mean /= n;
    double sty = 0.0;
    for (std::size_t k = 0; k < window; ++k) sty += (static_cast<double>(k) - tbar) * (series[end - window + k] - mean);
    if (std::abs(sty / stt) < slope_fraction * ensemble_size) return end;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Adaptation

/// Golden-section bracket on log(beta).
struct BetaBracket {
  double log_lo = 0.0;
  double log_hi = 0.0;
  bool converged = false;

  static BetaBracket from_bounds(double lo, double hi) { return {std::log(lo), std::log(hi), false}; }

  static constexpr double inv_phi = 0.6180339887498949;  // 1 / golden ratio

  double lower_point() const noexcept { return log_hi - inv_phi * (log_hi - log_lo); }
  double upper_point() const noexcept { return log_lo + inv_phi * (log_hi - log_lo); }
  double centre() const noexcept { return 0.5 * (log_lo + log_hi); }
  double width() const noexcept { return log_hi - log_lo; }
};

/// One epoch update from the scores at the lower and upper interior points
/// (larger is better). Drops the worse outer third; on a tie keeps the middle.
inline BetaBracket adapt_beta(BetaBracket b, double score_lower, double score_upper, double resolution) {
  if (b.converged) return b;
  const double c = b.lower_point(), d = b.upper_point();
  if (score_lower > score_upper) {
    b.log_hi = d;
  } else if (score_upper > score_lower) {
    b.log_lo = c;
  } else {
    b.log_lo = c;
    b.log_hi = d;
  }
  if (b.width() < resolution) b.converged = true;
  return b;
}

/// Epoch ends n_k = floor(n0 g^k) below `horizon`, with gaps forced strictly increasing.
inline std::vector<std::size_t> adaptation_schedule(std::size_t n0, double growth, std::size_t horizon) {
  if (n0 < 1 || !(growth > 1.0)) throw ParameterError("adaptation schedule needs n0 >= 1 and growth > 1");
  std::vector<std::size_t> ends;
  double x = static_cast<double>(n0);
  std::size_t prev = n0, gap = 0;
  if (n0 <= horizon) ends.push_back(n0);
  for (;;) {
    x *= growth;
    auto next = static_cast<std::size_t>(std::floor(x));
    if (next - prev <= gap) next = prev + gap + 1;
    gap = next - prev;
    prev = next;
    if (next > horizon) break;
    ends.push_back(next);
    if (x < static_cast<double>(next)) x = static_cast<double>(next);
  }
  return ends;
}

namespace detail {

/// Tracks the adaptive beta over a run. Each measurement epoch probes the
/// bracket's lower and upper interior points. With `Split::halves` the whole
/// ensemble runs at the lower point for the first half of the epoch and at the
/// upper point for the second half. With `Split::slots` slot j belongs to group
/// j % 2, group 0 runs at the lower point and group 1 at the upper one.
class BetaAdapter {
 public:
  enum class Split { halves, slots };

  BetaAdapter(const AdaptationSpec& spec, double initial_beta, std::size_t horizon, Split split)
      : spec_(spec),
        bracket_(BetaBracket::from_bounds(spec.beta_lo, spec.beta_hi)),
        schedule_(adaptation_schedule(spec.n0, spec.growth, horizon)),
        initial_beta_(initial_beta),
        split_(split),
        horizon_(horizon) {}

  /// Beta for group g during the current iteration.
  double group_beta(std::size_t g) const {
    if (phase_ == Phase::warmup) return initial_beta_;
    if (phase_ == Phase::frozen) return frozen_;
    const std::size_t probe = split_ == Split::slots ? g % 2 : current_half();
    return std::exp(probe == 0 ? bracket_.lower_point() : bracket_.upper_point());
  }

  bool measuring() const noexcept { return phase_ == Phase::measuring; }

  /// Beta recorded in diagnostics: the bracket centre while measuring.
  double reported_beta() const {
    if (phase_ == Phase::warmup) return initial_beta_;
    if (phase_ == Phase::frozen) return frozen_;
    return std::exp(bracket_.centre());
  }

  /// Slot split: scores for groups 0 and 1 this iteration.
  void record(double score0, double score1) {
    add(0, score0);
    add(1, score1);
  }

  /// Half split: one score for the whole ensemble this iteration.
  void record(double score) { add(current_half(), score); }

  /// Called before `iteration` runs; returns true when the bracket changes here.
  bool begin_iteration(std::size_t iteration) {
    iteration_ = iteration;
    if (next_ >= schedule_.size() || schedule_[next_] != iteration || phase_ == Phase::frozen) return false;
    ++next_;
    if (phase_ == Phase::warmup) {
      phase_ = Phase::measuring;
    } else {
      bracket_ = adapt_beta(bracket_, mean(0), mean(1), spec_.resolution);
      if (bracket_.converged) {
        phase_ = Phase::frozen;
        frozen_ = std::exp(bracket_.centre()) * spec_.overdispersion;
      }
    }
    epoch_start_ = iteration;
    epoch_end_ = next_ < schedule_.size() ? schedule_[next_] : horizon_;
    sum_[0] = sum_[1] = 0.0;
    count_[0] = count_[1] = 0;
    return true;
  }

  bool converged() const noexcept { return phase_ == Phase::frozen; }
  const BetaBracket& bracket() const noexcept { return bracket_; }

 private:
  enum class Phase { warmup, measuring, frozen };

  std::size_t current_half() const noexcept {
    return 2 * (iteration_ - epoch_start_) < epoch_end_ - epoch_start_ ? 0 : 1;
  }
  void add(std::size_t g, double score) {
    sum_[g] += score;
    ++count_[g];
  }
  double mean(std::size_t g) const { return count_[g] ? sum_[g] / static_cast<double>(count_[g]) : 0.0; }

  AdaptationSpec spec_;
  BetaBracket bracket_;
  std::vector<std::size_t> schedule_;
  std::size_t next_ = 0;
  double initial_beta_;
  Split split_;
  std::size_t horizon_;
  double frozen_ = kNaN;
  Phase phase_ = Phase::warmup;
  std::size_t iteration_ = 0, epoch_start_ = 0, epoch_end_ = 0;
  double sum_[2] = {0.0, 0.0};
  std::size_t count_[2] = {0, 0};
};

}  // namespace detail

/// Kernel for each slot: scouts first, with `group_beta(j % 2)` as the base beta.
template <class GroupBeta>
std::vector<ProposalKernel> slot_kernels(const KernelSpec& spec, std::size_t ensemble_size, GroupBeta&& group_beta) {
  std::vector<ProposalKernel> out;
  out.reserve(ensemble_size);
  for (std::size_t j = 0; j < ensemble_size; ++j) {
    double b = group_beta(j % 2);
    if (j < spec.scout_count) b *= spec.scout_multiplier;
    out.push_back(spec.kernel.with_beta(b));
  }
  return out;
}

inline std::vector<ProposalKernel> slot_kernels(const KernelSpec& spec, std::size_t ensemble_size) {
  return slot_kernels(spec, ensemble_size, [&](std::size_t) { return spec.kernel.beta; });
}

// ---------------------------------------------------------------------------
// PAIS

struct StepResult {
  PointSet proposals;
  std::vector<double> log_weights;
  PointSet next;
  DiagnosticsRecord record;
};

/// One PAIS iteration: propose from each member's kernel, weight against the
/// ensemble mixture, resample to an evenly weighted ensemble.
inline StepResult pais_step(const PointSet& states, std::span<const ProposalKernel> kernels,
                            const TargetPosterior& target, const ResamplerSpec& resampler, std::uint64_t seed,
                            std::size_t iteration, std::size_t threads = 1) {
  const std::size_t m = states.size();
  StepResult r;
  const std::vector<KernelComponent> comps = prepare_components(kernels, states, target, threads);
  r.proposals = PointSet(m, states.dim());
  parallel_for(m, threads, [&](std::size_t j) {
    RandomStream rng(seed, stream_tag::propose, iteration, j);
    comps[j].sample(rng, r.proposals[j]);
  });
  r.log_weights = compute_weights(target, r.proposals, comps, threads);
  bool any = false;
  for (double x : r.log_weights) any = any || x != kNegInf;
  if (!any) throw IterationError(iteration, "all importance weights are zero");

  r.record.iteration = iteration;
  r.record.ess = ess_log(r.log_weights);
  r.record.weight_variance = weight_variance_log(r.log_weights);
  r.record.beta = kernels.empty() ? kNaN : kernels.back().beta;
  for (const auto& c : comps) r.record.drift_fallbacks += c.drift_fallbacks();

  RandomStream rng(seed, stream_tag::resample, iteration, 0);
  r.next = resample(resampler, r.proposals, r.log_weights, rng);
  return r;
}

namespace detail {

inline PointSet initial_ensemble(const TargetPosterior& target, const SamplerSettings& s) {
  if (s.initial_states) return *s.initial_states;
  PointSet x(s.ensemble_size, target.dim);
  for (std::size_t j = 0; j < s.ensemble_size; ++j) {
    RandomStream rng(s.seed, stream_tag::init, 0, j);
    const Point p = target.sample_prior(rng);
    std::copy(p.begin(), p.end(), x[j].begin());
  }
  return x;
}

inline void finish_burn_in(SamplerOutput& out, const SamplerSettings& s) {
  const std::size_t n = out.iterations();
  switch (s.burn_in.mode) {
    case BurnInMode::none: out.burn_in = 0; break;
    case BurnInMode::fixed: out.burn_in = std::min(s.burn_in.iterations, n); break;
    case BurnInMode::automatic:
      if (s.sampler == SamplerKind::mh) {
        out.burn_in = n / 10;
      } else {
        std::vector<double> series(n);
        for (std::size_t i = 0; i < n; ++i) series[i] = out.diagnostics[i].ess;
        out.burn_in = detect_burn_in(series, static_cast<double>(s.ensemble_size), s.burn_in.window,
                                     s.burn_in.slope_fraction, s.burn_in.rise_fraction);
      }
      break;
  }
  const std::size_t b = out.first_kept();
  for (auto& rec : out.diagnostics) rec.burned_in = rec.iteration >= b;
}

}  // namespace detail

/// Runs N PAIS iterations. Each (Y, W) batch goes to `sink` (if given) as it
/// completes. If an iteration fails, the batches already delivered stay
/// delivered and the error propagates.
inline SamplerOutput run_pais(const TargetPosterior& target, const SamplerSettings& s, const SampleSink& sink = {}) {
  s.validate(target.dim);
  const auto t0 = std::chrono::steady_clock::now();
  SamplerOutput out;
  out.ensemble_size = s.ensemble_size;
  out.initial_states = detail::initial_ensemble(target, s);
  PointSet x = out.initial_states;
  if (s.store_samples) {
    out.samples = PointSet(0, target.dim);
    out.samples.reserve(s.iterations * s.ensemble_size);
    out.log_weights.reserve(s.iterations * s.ensemble_size);
  }
  std::optional<detail::BetaAdapter> adapter;
  if (s.adaptation.enabled)
    adapter.emplace(s.adaptation, s.kernel.kernel.beta, s.iterations, detail::BetaAdapter::Split::halves);

  for (std::size_t i = 0; i < s.iterations; ++i) {
    std::vector<ProposalKernel> kernels;
    double reported = s.kernel.kernel.beta;
    if (adapter) {
      if (adapter->begin_iteration(i)) out.adaptation_changes.push_back(i);
      kernels = slot_kernels(s.kernel, s.ensemble_size, [&](std::size_t g) { return adapter->group_beta(g); });
      reported = adapter->reported_beta();
    } else {
      kernels = slot_kernels(s.kernel, s.ensemble_size);
    }
    StepResult r = pais_step(x, kernels, target, s.resampler, s.seed, i, s.threads);
    r.record.beta = reported;
    if (adapter && adapter->measuring())
      adapter->record(r.record.ess / static_cast<double>(s.ensemble_size));
    out.drift_fallbacks += r.record.drift_fallbacks;
    out.beta_trace.push_back(reported);
    out.diagnostics.push_back(r.record);
    if (s.store_samples) {
      for (std::size_t j = 0; j < r.proposals.size(); ++j) out.samples.push_back(r.proposals[j]);
      out.log_weights.insert(out.log_weights.end(), r.log_weights.begin(), r.log_weights.end());
    }
    if (sink) sink(IterationBatch{i, r.proposals, r.log_weights, out.diagnostics.back()});
    x = std::move(r.next);
  }
  out.final_states = std::move(x);
  if (adapter) {
    out.adaptation_converged = adapter->converged();
    out.final_beta = adapter->converged() ? adapter->reported_beta() : std::exp(adapter->bracket().centre());
  } else {
    out.final_beta = s.kernel.kernel.beta;
  }
  detail::finish_burn_in(out, s);
  out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

// ---------------------------------------------------------------------------
// Metropolis-Hastings

struct MhStepResult {
  PointSet next;
  std::vector<char> accepted;
};

/// One step of M independent MH chains with Hastings correction.
inline MhStepResult mh_step(const PointSet& states, std::span<const ProposalKernel> kernels,
                            const TargetPosterior& target, std::uint64_t seed, std::size_t iteration,
                            std::size_t threads = 1) {
  const std::size_t m = states.size();
  MhStepResult r{states, std::vector<char>(m, 0)};
  parallel_for(m, threads, [&](std::size_t j) {
    RandomStream rng(seed, stream_tag::propose, iteration, j);
    const auto x = states[j];
    const KernelComponent forward = prepare_component(kernels[j], x, target);
    Point y(x.size());
    forward.sample(rng, y);
    const double lpy = target.log_density(y);
    if (lpy == kNegInf) return;
    double log_ratio = lpy - target.log_density(x);
    if (!kernels[j].symmetric()) {
      const KernelComponent backward = prepare_component(kernels[j], y, target);
      log_ratio += backward.log_density(x) - forward.log_density(y);
    }
    RandomStream accept_rng(seed, stream_tag::accept, iteration, j);
    if (log_ratio >= 0.0 || std::log(accept_rng.uniform()) < log_ratio) {
      std::copy(y.begin(), y.end(), r.next[j].begin());
      r.accepted[j] = 1;
    }
  });
  return r;
}

/// M independent MH chains; the sample stream holds the chain states after
/// each step with log weight 0.
inline SamplerOutput run_mh(const TargetPosterior& target, const SamplerSettings& s, const SampleSink& sink = {}) {
  s.validate(target.dim);
  const auto t0 = std::chrono::steady_clock::now();
  SamplerOutput out;
  out.ensemble_size = s.ensemble_size;
  out.initial_states = detail::initial_ensemble(target, s);
  out.acceptance_per_chain.assign(s.ensemble_size, 0);
  PointSet x = out.initial_states;
  for (std::size_t j = 0; j < x.size(); ++j)
    if (target.log_density(x[j]) == kNegInf) throw ParameterError("MH chains must start inside the target support");
  if (s.store_samples) {
    out.samples = PointSet(0, target.dim);
    out.samples.reserve(s.iterations * s.ensemble_size);
    out.log_weights.reserve(s.iterations * s.ensemble_size);
  }
  const std::vector<double> zeros(s.ensemble_size, 0.0);
  std::optional<detail::BetaAdapter> adapter;
  if (s.adaptation.enabled)
    adapter.emplace(s.adaptation, s.kernel.kernel.beta, s.iterations, detail::BetaAdapter::Split::slots);

  for (std::size_t i = 0; i < s.iterations; ++i) {
    std::vector<ProposalKernel> kernels;
    double reported = s.kernel.kernel.beta;
    if (adapter) {
      if (adapter->begin_iteration(i)) out.adaptation_changes.push_back(i);
      kernels = slot_kernels(s.kernel, s.ensemble_size, [&](std::size_t g) { return adapter->group_beta(g); });
      reported = adapter->reported_beta();
    } else {
      kernels = slot_kernels(s.kernel, s.ensemble_size);
    }
    MhStepResult r = mh_step(x, kernels, target, s.seed, i, s.threads);
    DiagnosticsRecord rec;
    rec.iteration = i;
    rec.ess = static_cast<double>(s.ensemble_size);
    rec.weight_variance = 0.0;
    rec.beta = reported;
    std::size_t acc = 0, acc_g[2] = {0, 0}, n_g[2] = {0, 0};
    for (std::size_t j = 0; j < r.accepted.size(); ++j) {
      acc += r.accepted[j];
      out.acceptance_per_chain[j] += r.accepted[j];
      acc_g[j % 2] += r.accepted[j];
      ++n_g[j % 2];
    }
    rec.acceptance_count = acc;
    if (adapter && adapter->measuring()) {
      auto score = [&](std::size_t g) {
        const double rate = n_g[g] ? static_cast<double>(acc_g[g]) / static_cast<double>(n_g[g]) : 0.0;
        return -std::abs(rate - s.adaptation.target_acceptance);
      };
      adapter->record(score(0), score(1));
    }
    out.beta_trace.push_back(reported);
    out.diagnostics.push_back(rec);
    if (s.store_samples) {
      for (std::size_t j = 0; j < r.next.size(); ++j) out.samples.push_back(r.next[j]);
      out.log_weights.insert(out.log_weights.end(), zeros.begin(), zeros.end());
    }
    if (sink) sink(IterationBatch{i, r.next, zeros, out.diagnostics.back()});
    x = std::move(r.next);
  }
  out.final_states = std::move(x);
  if (adapter) {
    out.adaptation_converged = adapter->converged();
    out.final_beta = adapter->converged() ? adapter->reported_beta() : std::exp(adapter->bracket().centre());
  } else {
    out.final_beta = s.kernel.kernel.beta;
  }
  detail::finish_burn_in(out, s);
  out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

inline SamplerOutput run_sampler(const TargetPosterior& target, const SamplerSettings& s,
                                 const SampleSink& sink = {}) {
  return s.sampler == SamplerKind::pais ? run_pais(target, s, sink) : run_mh(target, s, sink);
}

/// Overall acceptance rate of an MH run.
inline double acceptance_rate(const SamplerOutput& out) {
  std::size_t acc = 0;
  for (auto a : out.acceptance_per_chain) acc += a;
  const double total = static_cast<double>(out.iterations() * out.ensemble_size);
  return total > 0 ? static_cast<double>(acc) / total : kNaN;
}

}  // namespace pais
