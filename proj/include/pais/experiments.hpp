#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "pais/config.hpp"
#include "pais/diagnostics.hpp"
#include "pais/engine.hpp"
#include "pais/resamplers.hpp"

namespace pais {

// ---------------------------------------------------------------------------
// CSV

/// Comma-separated writer; the first line records the config hash and seed.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::string& hash, std::uint64_t seed,
            const std::vector<std::string>& header)
      : out_(path) {
    if (!out_) throw Error("cannot write " + path.string());
    out_ << "# config_hash=" << hash << ", seed=" << seed << '\n';
    for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
    out_ << '\n';
  }

  CsvWriter& cell(double v) {
    sep();
    out_ << format_double(v);
    return *this;
  }
  CsvWriter& cell(std::size_t v) {
    sep();
    out_ << v;
    return *this;
  }
  CsvWriter& cell(const std::string& v) {
    sep();
    out_ << v;
    return *this;
  }
  CsvWriter& blank() {
    sep();
    return *this;
  }
  void end_row() {
    out_ << '\n';
    first_ = true;
  }
  void flush() { out_.flush(); }

 private:
  void sep() {
    if (!first_) out_ << ',';
    first_ = false;
  }
  std::ofstream out_;
  bool first_ = true;
};

// ---------------------------------------------------------------------------
// Run summaries

struct MomentSummary {
  std::size_t coord;
  int order;
  double estimate;
  double reference;
  /// Relative error, or absolute when the reference moment is zero.
  double error;
  bool relative;
};

struct RunSummary {
  std::size_t iterations = 0;
  std::size_t burn_in = 0;
  bool burn_in_detected = false;
  std::size_t pooled_samples = 0;
  double mean_ess = kNaN;
  double mean_weight_variance = kNaN;
  double acceptance_rate = kNaN;
  double l2_error = kNaN;
  double out_of_range_mass = kNaN;
  std::vector<double> mean;
  std::vector<MomentSummary> moments;
  /// Weighted estimate of k2 k4 / (k2 + k3) (chemical only).
  double qssa_rate = kNaN;
  double final_beta = kNaN;
  double wall_seconds = 0.0;
};

/// Pooled post-burn-in statistics of a run.
inline RunSummary summarize(const SamplerOutput& out, const TargetPosterior& target, SamplerKind kind,
                            double k4 = 1.0) {
  RunSummary s;
  s.iterations = out.iterations();
  s.burn_in = out.first_kept();
  s.burn_in_detected = out.burn_in.has_value();
  s.final_beta = out.final_beta;
  s.wall_seconds = out.wall_seconds;
  if (kind == SamplerKind::mh) s.acceptance_rate = acceptance_rate(out);
  if (s.burn_in >= s.iterations) return s;

  double se = 0.0, sv = 0.0;
  for (std::size_t i = s.burn_in; i < s.iterations; ++i) {
    se += out.diagnostics[i].ess;
    sv += out.diagnostics[i].weight_variance;
  }
  const double n = static_cast<double>(s.iterations - s.burn_in);
  s.mean_ess = se / n;
  s.mean_weight_variance = sv / n;
  if (out.samples.empty()) return s;

  const PointSet y = out.pooled_samples();
  const auto lw = out.pooled_log_weights();
  s.pooled_samples = y.size();
  for (std::size_t c = 0; c < target.dim; ++c) s.mean.push_back(weighted_moment(y, lw, c, 1));
  if (target.dim == 2) {
    const std::vector<double> w = normalize_log_weights(lw);
    double r = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) r += w[i] * qssa_rate(y[i][0], y[i][1], k4);
    s.qssa_rate = r;
  }
  if (target.reference) {
    const auto& ref = *target.reference;
    const HistogramGrid h = build_histogram(y, lw, ref.grid);
    s.l2_error = relative_l2_error(h, ref);
    s.out_of_range_mass = h.out_of_range_mass;
    for (std::size_t c = 0; c < target.dim; ++c)
      for (int m = 1; m <= 3; ++m) {
        const double r = ref.moment(c, m);
        const double est = weighted_moment(y, lw, c, m);
        const bool rel = r != 0.0;
        s.moments.push_back({c, m, est, r, rel ? std::abs(est - r) / std::abs(r) : std::abs(est - r), rel});
      }
  }
  return s;
}

inline nlohmann::json summary_json(const RunSummary& s) {
  using nlohmann::json;
  auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  json moments = json::array();
  for (const auto& m : s.moments)
    moments.push_back({{"coord", m.coord},
                       {"order", m.order},
                       {"estimate", num(m.estimate)},
                       {"reference", num(m.reference)},
                       {"error", num(m.error)},
                       {"error_kind", m.relative ? "relative" : "absolute"}});
  json mean = json::array();
  for (double v : s.mean) mean.push_back(num(v));
  return {{"iterations", s.iterations},
          {"burn_in", s.burn_in_detected ? json(s.burn_in) : json(nullptr)},
          {"pooled_samples", s.pooled_samples},
          {"mean_ess", num(s.mean_ess)},
          {"mean_weight_variance", num(s.mean_weight_variance)},
          {"acceptance_rate", num(s.acceptance_rate)},
          {"l2_error", num(s.l2_error)},
          {"out_of_range_mass", num(s.out_of_range_mass)},
          {"mean", mean},
          {"moments", moments},
          {"qssa_rate", num(s.qssa_rate)},
          {"final_beta", num(s.final_beta)},
          {"wall_seconds", s.wall_seconds}};
}

// ---------------------------------------------------------------------------
// Commands

struct CommandOptions {
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out;
  std::optional<std::size_t> threads;
};

/// Applies command-line overrides and the seed precedence rule.
inline ExperimentSpec apply_overrides(ExperimentSpec spec, const CommandOptions& opt) {
  spec.run.seed = resolve_seed(spec, opt.seed);
  spec.seed_from_config = true;
  if (opt.out) spec.output.directory = opt.out->string();
  if (opt.threads) {
    if (*opt.threads < 1) throw ConfigError("threads: must be >= 1");
    spec.run.threads = *opt.threads;
  }
  return spec;
}

namespace detail {

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

inline void write_diagnostics(const std::filesystem::path& path, const std::string& hash, std::uint64_t seed,
                              const std::vector<DiagnosticsRecord>& records, std::size_t ensemble_size,
                              bool burn_in_known) {
  CsvWriter csv(path, hash, seed, {"iter", "ess", "var_w", "beta", "acc_rate", "burned_in"});
  for (const auto& r : records) {
    csv.cell(r.iteration).cell(r.ess).cell(r.weight_variance).cell(r.beta);
    if (r.acceptance_count)
      csv.cell(static_cast<double>(*r.acceptance_count) / static_cast<double>(ensemble_size));
    else
      csv.blank();
    if (burn_in_known)
      csv.cell(std::size_t{r.burned_in ? 1u : 0u});
    else
      csv.blank();
    csv.end_row();
  }
}

}  // namespace detail

struct RunResult {
  SamplerOutput output;
  RunSummary summary;
};

/// Runs the configured sampler once per repeat (seed + r). Writes
/// diagnostics.csv, weighted_samples.csv and summary.json into the output
/// directory, or into rep_<r>/ subdirectories when repeats > 1.
inline std::vector<RunResult> cmd_run(const ExperimentSpec& spec) {
  namespace fs = std::filesystem;
  const std::string hash = config_hash(spec);
  const BuiltTarget target = build_target(spec.target, spec.run.seed);
  std::vector<RunResult> results;
  for (std::size_t rep = 0; rep < spec.repeats; ++rep) {
    SamplerSettings settings = spec.run;
    settings.seed = spec.run.seed + rep;
    const fs::path dir =
        spec.repeats > 1 ? fs::path(spec.output.directory) / ("rep_" + std::to_string(rep)) : fs::path(spec.output.directory);
    fs::create_directories(dir);

    std::optional<CsvWriter> samples_csv;
    if (spec.output.write_samples) {
      std::vector<std::string> header{"iter", "member"};
      for (std::size_t c = 0; c < target.posterior.dim; ++c) header.push_back("x" + std::to_string(c));
      header.push_back("log_w");
      samples_csv.emplace(dir / "weighted_samples.csv", hash, settings.seed, header);
    }
    std::vector<DiagnosticsRecord> streamed;
    auto sink = [&](const IterationBatch& b) {
      streamed.push_back(b.record);
      if (!samples_csv) return;
      for (std::size_t j = 0; j < b.samples.size(); ++j) {
        samples_csv->cell(b.iteration).cell(j);
        for (double x : b.samples[j]) samples_csv->cell(x);
        samples_csv->cell(b.log_weights[j]).end_row();
      }
    };

    RunResult r;
    try {
      r.output = run_sampler(target.posterior, settings, sink);
    } catch (...) {
      if (samples_csv) samples_csv->flush();
      detail::write_diagnostics(dir / "diagnostics.csv", hash, settings.seed, streamed, settings.ensemble_size, false);
      throw;
    }
    detail::write_diagnostics(dir / "diagnostics.csv", hash, settings.seed, r.output.diagnostics,
                              settings.ensemble_size, true);
    r.summary = summarize(r.output, target.posterior, settings.sampler, spec.target.chemical.k4);

    nlohmann::json j = summary_json(r.summary);
    j["schema_version"] = kSchemaVersion;
    j["name"] = spec.name;
    j["config_hash"] = hash;
    j["seed"] = settings.seed;
    j["sampler"] = std::string(to_string(settings.sampler));
    j["ensemble_size"] = settings.ensemble_size;
    j["adaptation_converged"] = r.output.adaptation_converged;
    j["drift_fallbacks"] = r.output.drift_fallbacks;
    j["data"] = target.data;
    if (target.posterior.reference && std::isfinite(target.posterior.reference->kl_prior))
      j["kl_prior"] = target.posterior.reference->kl_prior;
    detail::write_json(dir / "summary.json", j);
    results.push_back(std::move(r));
  }
  return results;
}

struct SweepRow {
  double beta;
  double mean_ess;
  double weight_variance;
  double acceptance_rate;
  double l2_error;
};

struct TuneResult {
  std::vector<SweepRow> rows;
  double beta_star = kNaN;
};

namespace detail {

/// Geometric mean; zero if any value is zero, NaN if any is NaN or negative.
inline double geometric_mean(const std::vector<double>& v) {
  if (v.empty()) return kNaN;
  double s = 0.0;
  for (double x : v) {
    if (std::isnan(x) || x < 0.0) return kNaN;
    if (x == 0.0) return 0.0;
    s += std::log(x);
  }
  return std::exp(s / static_cast<double>(v.size()));
}

}  // namespace detail

/// Runs the sampler at every sweep beta for each repeat (seed + r) and writes
/// sweep.csv with geometric means over repeats. beta* maximizes mean ESS
/// (PAIS) or minimizes |acceptance - target| (MH); ties keep the first.
inline TuneResult cmd_tune(const ExperimentSpec& spec, bool write = true) {
  namespace fs = std::filesystem;
  if (!spec.sweep) throw ConfigError("sweep: required by the tune command");
  const std::string hash = config_hash(spec);
  const BuiltTarget target = build_target(spec.target, spec.run.seed);
  const bool mh = spec.run.sampler == SamplerKind::mh;
  TuneResult result;
  for (double beta : spec.sweep->grid()) {
    std::vector<double> ess, var, acc, l2;
    for (std::size_t rep = 0; rep < spec.repeats; ++rep) {
      SamplerSettings s = spec.run;
      s.seed = spec.run.seed + rep;
      s.kernel.kernel.beta = beta;
      s.adaptation.enabled = false;
      s.store_samples = target.posterior.reference.has_value();
      const SamplerOutput out = run_sampler(target.posterior, s);
      const RunSummary sum = summarize(out, target.posterior, s.sampler, spec.target.chemical.k4);
      ess.push_back(sum.mean_ess);
      var.push_back(sum.mean_weight_variance);
      acc.push_back(sum.acceptance_rate);
      l2.push_back(sum.l2_error);
    }
    result.rows.push_back({beta, detail::geometric_mean(ess), detail::geometric_mean(var),
                           mh ? detail::geometric_mean(acc) : kNaN, detail::geometric_mean(l2)});
  }
  double best = kNegInf;
  for (const auto& r : result.rows) {
    const double score = mh ? -std::abs(r.acceptance_rate - spec.run.adaptation.target_acceptance) : r.mean_ess;
    if (score > best) {
      best = score;
      result.beta_star = r.beta;
    }
  }
  if (write) {
    const fs::path dir(spec.output.directory);
    fs::create_directories(dir);
    CsvWriter csv(dir / "sweep.csv", hash, spec.run.seed, {"beta", "mean_ess", "var_w", "acc_rate", "l2_error"});
    for (const auto& r : result.rows) {
      csv.cell(r.beta).cell(r.mean_ess).cell(r.weight_variance);
      if (mh)
        csv.cell(r.acceptance_rate);
      else
        csv.blank();
      if (std::isfinite(r.l2_error))
        csv.cell(r.l2_error);
      else
        csv.blank();
      csv.end_row();
    }
    detail::write_json(dir / "tune_summary.json", {{"schema_version", kSchemaVersion},
                                                   {"name", spec.name},
                                                   {"config_hash", hash},
                                                   {"seed", spec.run.seed},
                                                   {"sampler", std::string(to_string(spec.run.sampler))},
                                                   {"beta_star", result.beta_star}});
  }
  return result;
}

struct BenchRow {
  std::size_t ensemble_size;
  std::string scheme;
  /// Mean over repeats of the relative error in raw moments 1..3 against the
  /// weighted input ensemble.
  double error[3];
  /// Mean wall time per resampling call.
  double seconds;
};

/// Draws M points from N(1, 2), weights them toward N(2, 3) and resamples
/// with ETPF, AMR and bootstrap.
inline std::vector<BenchRow> bench_resamplers(const std::vector<std::size_t>& sizes, std::size_t repeats,
                                              std::uint64_t seed) {
  std::vector<BenchRow> rows;
  const char* names[3] = {"etpf", "amr", "bootstrap"};
  for (std::size_t m : sizes) {
    if (m < 2) throw ParameterError("bench: ensemble sizes must be >= 2");
    BenchRow acc[3];
    for (int s = 0; s < 3; ++s) acc[s] = {m, names[s], {0.0, 0.0, 0.0}, 0.0};
    for (std::size_t rep = 0; rep < repeats; ++rep) {
      RandomStream rng(seed, stream_tag::bench, m, rep);
      std::normal_distribution<double> nd(1.0, std::sqrt(2.0));
      PointSet y(m, 1);
      std::vector<double> lw(m);
      for (std::size_t i = 0; i < m; ++i) {
        const double v = nd(rng);
        y[i][0] = v;
        lw[i] = detail::log_normal_pdf(v, 2.0, 3.0) - detail::log_normal_pdf(v, 1.0, 2.0);
      }
      double ref[3];
      for (int k = 0; k < 3; ++k) ref[k] = weighted_moment(y, lw, 0, k + 1);
      for (int s = 0; s < 3; ++s) {
        RandomStream rrng(seed, stream_tag::resample, m, rep);
        const auto t0 = std::chrono::steady_clock::now();
        PointSet x = s == 0 ? etpf_resample(y, lw) : s == 1 ? amr_resample(y, lw) : bootstrap_resample(y, lw, rrng);
        acc[s].seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        for (int k = 0; k < 3; ++k) acc[s].error[k] += std::abs(weighted_moment(x, {}, 0, k + 1) - ref[k]) / std::abs(ref[k]);
      }
    }
    for (auto& r : acc) {
      for (double& e : r.error) e /= static_cast<double>(repeats);
      r.seconds /= static_cast<double>(repeats);
      rows.push_back(r);
    }
  }
  return rows;
}

inline std::vector<BenchRow> cmd_bench_resamplers(const ExperimentSpec& spec) {
  namespace fs = std::filesystem;
  const auto rows = bench_resamplers(spec.bench.ensemble_sizes, spec.bench.repeats, spec.run.seed);
  const fs::path dir(spec.output.directory);
  fs::create_directories(dir);
  CsvWriter csv(dir / "resampler_bench.csv", config_hash(spec), spec.run.seed,
                {"M", "scheme", "err_m1", "err_m2", "err_m3", "seconds"});
  for (const auto& r : rows) {
    csv.cell(r.ensemble_size).cell(r.scheme).cell(r.error[0]).cell(r.error[1]).cell(r.error[2]).cell(r.seconds);
    csv.end_row();
  }
  return rows;
}

/// Writes data.csv: `t,D` rows for the chemical target, a single `D` column otherwise.
inline BuiltTarget cmd_generate_data(const ExperimentSpec& spec) {
  namespace fs = std::filesystem;
  const BuiltTarget target = build_target(spec.target, spec.run.seed, false);
  const fs::path dir(spec.output.directory);
  fs::create_directories(dir);
  const bool chem = spec.target.family == TargetFamily::chemical;
  const std::uint64_t data_seed =
      (chem ? spec.target.chemical.data_seed : spec.target.scalar.data_seed).value_or(spec.run.seed);
  CsvWriter csv(dir / "data.csv", config_hash(spec), data_seed,
                chem ? std::vector<std::string>{"t", "D"} : std::vector<std::string>{"D"});
  for (std::size_t i = 0; i < target.data.size(); ++i) {
    if (chem) csv.cell(target.times[i]);
    csv.cell(target.data[i]).end_row();
  }
  return target;
}

}  // namespace pais
