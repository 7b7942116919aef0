#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pais/engine.hpp"
#include "pais/targets.hpp"

namespace pais {

inline constexpr int kSchemaVersion = 1;

enum class TargetFamily { gaussian, bimodal, chemical };

inline std::string_view to_string(TargetFamily f) {
  switch (f) {
    case TargetFamily::gaussian: return "gaussian";
    case TargetFamily::bimodal: return "bimodal";
    case TargetFamily::chemical: return "chemical";
  }
  return "?";
}

/// Gaussian and bimodal targets: G(x) = x or x^2, prior N(0, tau2), noise N(0, sigma2).
struct ScalarTargetSpec {
  double tau2 = 0.01;
  double sigma2 = 0.01;
  /// Noise-free observation G(x_ref).
  double g_ref = 4.0;
  /// Explicit observation; overrides g_ref and noise.
  std::optional<double> data;
  bool noisy = false;
  /// Seed for the observation noise; the run seed when absent.
  std::optional<std::uint64_t> data_seed;

  friend bool operator==(const ScalarTargetSpec&, const ScalarTargetSpec&) = default;
};

struct ChemicalTargetSpec {
  double k1 = 100.0;
  double k4 = 1.0;
  /// Rates (k2, k3) used to simulate the data.
  double k2_true = 50.0;
  double k3_true = 100.0;
  double sigma2 = 225.0;
  double alpha0 = 56.25;
  double beta0 = 0.75;
  std::vector<double> obs_times = default_observation_times();
  /// Explicit observations; simulated from the full system when absent.
  std::optional<std::vector<double>> data;
  bool noisy = false;
  /// Seed for the observation noise; the run seed when absent.
  std::optional<std::uint64_t> data_seed;

  friend bool operator==(const ChemicalTargetSpec&, const ChemicalTargetSpec&) = default;
};

struct TargetSpec {
  TargetFamily family = TargetFamily::gaussian;
  ScalarTargetSpec scalar;
  ChemicalTargetSpec chemical;
  /// Histogram grid for L2 errors; family default when absent.
  std::optional<GridSpec> grid;

  friend bool operator==(const TargetSpec&, const TargetSpec&) = default;

  static TargetSpec defaults(TargetFamily f) {
    TargetSpec t;
    t.family = f;
    if (f == TargetFamily::bimodal) t.scalar = {0.25, 0.1, 0.75, std::nullopt, false, std::nullopt};
    return t;
  }
};

struct SweepSpec {
  std::size_t count = 32;
  double beta_lo = 1e-5;
  double beta_hi = 2.0;
  /// Explicit grid; overrides count/beta_lo/beta_hi.
  std::optional<std::vector<double>> betas;

  std::vector<double> grid() const { return betas ? *betas : log_space(beta_lo, beta_hi, count); }

  friend bool operator==(const SweepSpec&, const SweepSpec&) = default;
};

struct BenchSpec {
  std::vector<std::size_t> ensemble_sizes{32, 64, 128, 256, 512};
  std::size_t repeats = 200;

  friend bool operator==(const BenchSpec&, const BenchSpec&) = default;
};

struct OutputSpec {
  std::string directory = "out";
  bool write_samples = true;

  friend bool operator==(const OutputSpec&, const OutputSpec&) = default;
};

struct ExperimentSpec {
  std::string name = "experiment";
  TargetSpec target;
  SamplerSettings run;
  std::size_t repeats = 1;
  std::optional<SweepSpec> sweep;
  BenchSpec bench;
  OutputSpec output;
  /// Whether the source document set "seed" (environment overrides apply otherwise).
  bool seed_from_config = false;

  friend bool operator==(const ExperimentSpec& a, const ExperimentSpec& b) {
    const auto& x = a.run;
    const auto& y = b.run;
    return a.name == b.name && a.target == b.target && a.repeats == b.repeats && a.sweep == b.sweep &&
           a.bench == b.bench && a.output == b.output && x.sampler == y.sampler &&
           x.ensemble_size == y.ensemble_size && x.iterations == y.iterations && x.kernel == y.kernel &&
           x.resampler == y.resampler && x.adaptation == y.adaptation && x.burn_in == y.burn_in &&
           x.seed == y.seed && x.threads == y.threads && x.initial_states == y.initial_states;
  }
};

// ---------------------------------------------------------------------------
// Parsing

namespace detail {

using nlohmann::json;

/// Walks a JSON object, tracking the field path and rejecting unknown keys.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_.empty() ? "<root>" : path_, "expected an object");
  }

  [[noreturn]] static void fail(const std::string& path, const std::string& what) {
    throw ConfigError(path + ": " + what);
  }

  std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) && !j_.at(key).is_null();
  }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  double number(const std::string& key, double fallback) {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_number()) fail(at(key), "expected a number");
    return v.get<double>();
  }

  double positive(const std::string& key, double fallback) {
    const double v = number(key, fallback);
    if (!(v > 0.0) || !std::isfinite(v)) fail(at(key), "must be > 0");
    return v;
  }

  std::uint64_t count(const std::string& key, std::uint64_t fallback, std::uint64_t min = 0) {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0))
      fail(at(key), "expected a nonnegative integer");
    const auto n = v.get<std::uint64_t>();
    if (n < min) fail(at(key), "must be >= " + std::to_string(min));
    return n;
  }

  bool boolean(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_boolean()) fail(at(key), "expected a boolean");
    return v.get<bool>();
  }

  std::string string(const std::string& key, const std::string& fallback) {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_string()) fail(at(key), "expected a string");
    return v.get<std::string>();
  }

  std::vector<double> numbers(const std::string& key) {
    if (!has(key)) fail(at(key), "required");
    const json& v = j_.at(key);
    if (!v.is_array()) fail(at(key), "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) fail(at(key) + "[" + std::to_string(i) + "]", "expected a number");
      out.push_back(v[i].get<double>());
    }
    return out;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) fail(at(it.key()), "unknown key");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline GridSpec parse_grid(const json& j, const std::string& path) {
  ObjectReader r(j, path);
  GridSpec g;
  g.lower = r.numbers("lower");
  g.upper = r.numbers("upper");
  for (double b : r.numbers("bins")) {
    if (!(b >= 1.0) || b != std::floor(b)) ObjectReader::fail(r.at("bins"), "bin counts must be positive integers");
    g.bins.push_back(static_cast<std::size_t>(b));
  }
  r.finish();
  try {
    g.validate();
  } catch (const ParameterError& e) {
    ObjectReader::fail(path, e.what());
  }
  return g;
}

inline TargetSpec parse_target(const json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "gaussian") return TargetSpec::defaults(TargetFamily::gaussian);
    if (s == "bimodal") return TargetSpec::defaults(TargetFamily::bimodal);
    if (s == "chemical") return TargetSpec::defaults(TargetFamily::chemical);
    ObjectReader::fail("target", "unknown target family '" + s + "'");
  }
  ObjectReader r(j, "target");
  const std::string family = r.string("family", "");
  TargetSpec t;
  if (family == "gaussian" || family == "bimodal") {
    t = TargetSpec::defaults(family == "gaussian" ? TargetFamily::gaussian : TargetFamily::bimodal);
    auto& s = t.scalar;
    s.tau2 = r.positive("tau2", s.tau2);
    s.sigma2 = r.positive("sigma2", s.sigma2);
    s.g_ref = r.number("g_ref", s.g_ref);
    if (r.has("data")) s.data = r.number("data", 0.0);
    s.noisy = r.boolean("noisy", s.noisy);
    if (r.has("data_seed")) s.data_seed = r.count("data_seed", 0);
  } else if (family == "chemical") {
    t = TargetSpec::defaults(TargetFamily::chemical);
    auto& c = t.chemical;
    c.k1 = r.positive("k1", c.k1);
    c.k4 = r.positive("k4", c.k4);
    c.k2_true = r.positive("k2_true", c.k2_true);
    c.k3_true = r.positive("k3_true", c.k3_true);
    c.sigma2 = r.positive("sigma2", c.sigma2);
    c.alpha0 = r.positive("alpha0", c.alpha0);
    c.beta0 = r.positive("beta0", c.beta0);
    if (r.has("obs_times")) c.obs_times = r.numbers("obs_times");
    for (std::size_t i = 0; i < c.obs_times.size(); ++i)
      if (!(c.obs_times[i] > 0.0) || (i > 0 && !(c.obs_times[i] > c.obs_times[i - 1])))
        ObjectReader::fail(r.at("obs_times"), "times must be positive and strictly increasing");
    if (r.has("data")) {
      c.data = r.numbers("data");
      if (c.data->size() != c.obs_times.size())
        ObjectReader::fail(r.at("data"), "need one observation per entry of obs_times");
      for (double d : *c.data)
        if (!(d > 0.0)) ObjectReader::fail(r.at("data"), "observations must be > 0");
    }
    c.noisy = r.boolean("noisy", c.noisy);
    if (r.has("data_seed")) c.data_seed = r.count("data_seed", 0);
  } else {
    ObjectReader::fail(r.at("family"), "expected one of gaussian, bimodal, chemical");
  }
  if (r.has("grid")) t.grid = parse_grid(r.raw("grid"), r.at("grid"));
  r.finish();
  if (t.grid && t.grid->dim() != (t.family == TargetFamily::chemical ? 2u : 1u))
    ObjectReader::fail("target.grid", "grid dimension does not match the target");
  return t;
}

inline KernelSpec parse_kernel(const json& j) {
  ObjectReader r(j, "kernel");
  KernelSpec k;
  const std::string kind = r.string("kind", "rw_gaussian");
  try {
    k.kernel.kind = kernel_kind_from_string(kind);
  } catch (const ParameterError&) {
    ObjectReader::fail(r.at("kind"), "expected one of rw_gaussian, gamma_mean_centered, gamma_langevin");
  }
  k.kernel.beta = r.positive("beta", 1.0);
  if (r.has("covariance")) {
    if (k.kernel.kind != KernelKind::rw_gaussian) ObjectReader::fail(r.at("covariance"), "only valid for rw_gaussian");
    k.kernel.covariance = r.numbers("covariance");
  }
  if (r.has("scouts")) {
    ObjectReader s(r.raw("scouts"), r.at("scouts"));
    k.scout_count = s.count("count", 0);
    k.scout_multiplier = s.positive("multiplier", 10.0);
    s.finish();
  }
  r.finish();
  return k;
}

inline ResamplerSpec parse_resampler(const json& j) {
  ResamplerSpec spec;
  auto kind = [](const std::string& s, const std::string& path) {
    try {
      return resampler_kind_from_string(s);
    } catch (const ParameterError&) {
      ObjectReader::fail(path, "expected one of etpf, amr, bootstrap");
    }
  };
  if (j.is_string()) {
    spec.kind = kind(j.get<std::string>(), "resampler");
    return spec;
  }
  ObjectReader r(j, "resampler");
  spec.kind = kind(r.string("kind", "etpf"), r.at("kind"));
  spec.stochastic = r.boolean("stochastic", false);
  if (spec.stochastic && spec.kind == ResamplerKind::bootstrap)
    ObjectReader::fail(r.at("stochastic"), "bootstrap is always stochastic");
  r.finish();
  return spec;
}

inline AdaptationSpec parse_adaptation(const json& j) {
  ObjectReader r(j, "adaptation");
  AdaptationSpec a;
  a.enabled = r.boolean("enabled", a.enabled);
  a.n0 = r.count("n0", a.n0, 1);
  a.growth = r.number("growth", a.growth);
  if (!(a.growth > 1.0)) ObjectReader::fail(r.at("growth"), "must be > 1");
  a.beta_lo = r.positive("beta_lo", a.beta_lo);
  a.beta_hi = r.positive("beta_hi", a.beta_hi);
  if (!(a.beta_hi > a.beta_lo)) ObjectReader::fail(r.at("beta_hi"), "must exceed beta_lo");
  a.resolution = r.positive("resolution", a.resolution);
  a.overdispersion = r.positive("overdispersion", a.overdispersion);
  a.target_acceptance = r.number("target_acceptance", a.target_acceptance);
  if (!(a.target_acceptance > 0.0 && a.target_acceptance < 1.0))
    ObjectReader::fail(r.at("target_acceptance"), "must lie in (0, 1)");
  r.finish();
  return a;
}

inline BurnInSpec parse_burn_in(const json& j) {
  ObjectReader r(j, "burn_in");
  BurnInSpec b;
  const std::string mode = r.string("mode", "auto");
  if (mode == "auto")
    b.mode = BurnInMode::automatic;
  else if (mode == "fixed")
    b.mode = BurnInMode::fixed;
  else if (mode == "none")
    b.mode = BurnInMode::none;
  else
    ObjectReader::fail(r.at("mode"), "expected one of auto, fixed, none");
  b.iterations = r.count("iterations", b.iterations);
  b.window = r.count("window", b.window, 2);
  b.slope_fraction = r.positive("slope_fraction", b.slope_fraction);
  b.rise_fraction = r.positive("rise_fraction", b.rise_fraction);
  r.finish();
  return b;
}

inline std::string_view to_string(BurnInMode m) {
  switch (m) {
    case BurnInMode::automatic: return "auto";
    case BurnInMode::fixed: return "fixed";
    case BurnInMode::none: return "none";
  }
  return "?";
}

}  // namespace detail

/// Parses an experiment document. Errors name the offending field path.
inline ExperimentSpec parse_config_json(const nlohmann::json& doc) {
  using detail::ObjectReader;
  ObjectReader r(doc, "");
  ExperimentSpec spec;
  spec.name = r.string("name", spec.name);
  if (!r.has("target")) ObjectReader::fail("target", "required");
  spec.target = detail::parse_target(r.raw("target"));

  auto& run = spec.run;
  const std::string sampler = r.string("sampler", "pais");
  try {
    run.sampler = sampler_kind_from_string(sampler);
  } catch (const ParameterError&) {
    ObjectReader::fail("sampler", "expected pais or mh");
  }
  run.ensemble_size = r.count("ensemble_size", run.ensemble_size, 1);
  run.iterations = r.count("iterations", run.iterations);
  if (r.has("kernel")) run.kernel = detail::parse_kernel(r.raw("kernel"));
  if (run.kernel.scout_count > 0 && run.kernel.scout_count >= run.ensemble_size)
    ObjectReader::fail("kernel.scouts.count", "must be smaller than ensemble_size");
  if (r.has("resampler")) run.resampler = detail::parse_resampler(r.raw("resampler"));
  if (r.has("adaptation")) run.adaptation = detail::parse_adaptation(r.raw("adaptation"));
  if (run.adaptation.enabled && run.ensemble_size < 2)
    ObjectReader::fail("adaptation.enabled", "adaptation needs ensemble_size >= 2");
  if (r.has("burn_in")) run.burn_in = detail::parse_burn_in(r.raw("burn_in"));
  spec.seed_from_config = r.has("seed");
  run.seed = r.count("seed", 1);
  run.threads = r.count("threads", 1, 1);
  if (r.has("initial_states")) {
    const auto& v = r.raw("initial_states");
    if (!v.is_array()) ObjectReader::fail("initial_states", "expected an array of points");
    PointSet x;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const std::string path = "initial_states[" + std::to_string(i) + "]";
      if (!v[i].is_array()) ObjectReader::fail(path, "expected an array of numbers");
      Point p;
      for (const auto& c : v[i]) {
        if (!c.is_number()) ObjectReader::fail(path, "expected an array of numbers");
        p.push_back(c.get<double>());
      }
      if (!x.empty() && p.size() != x.dim()) ObjectReader::fail(path, "inconsistent dimension");
      x.push_back(p);
    }
    const std::size_t dim = spec.target.family == TargetFamily::chemical ? 2 : 1;
    if (x.size() != run.ensemble_size || x.dim() != dim)
      ObjectReader::fail("initial_states", "need ensemble_size points of the target dimension");
    run.initial_states = std::move(x);
  }

  spec.repeats = r.count("repeats", 1, 1);
  if (r.has("sweep")) {
    ObjectReader s(r.raw("sweep"), "sweep");
    SweepSpec sw;
    sw.count = s.count("count", sw.count, 2);
    sw.beta_lo = s.positive("beta_lo", sw.beta_lo);
    sw.beta_hi = s.positive("beta_hi", sw.beta_hi);
    if (!(sw.beta_hi >= sw.beta_lo)) ObjectReader::fail("sweep.beta_hi", "must be >= beta_lo");
    if (s.has("betas")) {
      sw.betas = s.numbers("betas");
      if (sw.betas->size() < 2) ObjectReader::fail("sweep.betas", "need at least two values");
      for (double b : *sw.betas)
        if (!(b > 0.0)) ObjectReader::fail("sweep.betas", "values must be > 0");
    }
    s.finish();
    spec.sweep = sw;
  }
  if (r.has("bench")) {
    ObjectReader b(r.raw("bench"), "bench");
    if (b.has("ensemble_sizes")) {
      spec.bench.ensemble_sizes.clear();
      for (double m : b.numbers("ensemble_sizes")) {
        if (!(m >= 2.0) || m != std::floor(m)) ObjectReader::fail("bench.ensemble_sizes", "values must be integers >= 2");
        spec.bench.ensemble_sizes.push_back(static_cast<std::size_t>(m));
      }
    }
    spec.bench.repeats = b.count("repeats", spec.bench.repeats, 1);
    b.finish();
  }
  if (r.has("output")) {
    ObjectReader o(r.raw("output"), "output");
    spec.output.directory = o.string("directory", spec.output.directory);
    spec.output.write_samples = o.boolean("write_samples", spec.output.write_samples);
    o.finish();
  }
  r.finish();

  if (run.kernel.kernel.kind != KernelKind::rw_gaussian && spec.target.family != TargetFamily::chemical)
    ObjectReader::fail("kernel.kind", "gamma kernels need a positive-support target");
  if (!run.kernel.kernel.covariance.empty()) {
    const std::size_t dim = spec.target.family == TargetFamily::chemical ? 2 : 1;
    try {
      run.kernel.kernel.validate(dim);
    } catch (const ParameterError& e) {
      ObjectReader::fail("kernel.covariance", e.what());
    }
  }
  return spec;
}

inline ExperimentSpec parse_config_text(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("<root>: invalid JSON: ") + e.what());
  }
  return parse_config_json(doc);
}

inline ExperimentSpec parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open config file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

// ---------------------------------------------------------------------------
// Serialization

/// Canonical document: every field explicit, keys sorted.
inline nlohmann::json to_json(const ExperimentSpec& spec) {
  using nlohmann::json;
  json j;
  j["name"] = spec.name;
  json t;
  t["family"] = std::string(to_string(spec.target.family));
  if (spec.target.family == TargetFamily::chemical) {
    const auto& c = spec.target.chemical;
    t["k1"] = c.k1;
    t["k4"] = c.k4;
    t["k2_true"] = c.k2_true;
    t["k3_true"] = c.k3_true;
    t["sigma2"] = c.sigma2;
    t["alpha0"] = c.alpha0;
    t["beta0"] = c.beta0;
    t["obs_times"] = c.obs_times;
    t["data"] = c.data ? json(*c.data) : json(nullptr);
    t["noisy"] = c.noisy;
    t["data_seed"] = c.data_seed ? nlohmann::json(*c.data_seed) : nlohmann::json(nullptr);
  } else {
    const auto& s = spec.target.scalar;
    t["tau2"] = s.tau2;
    t["sigma2"] = s.sigma2;
    t["g_ref"] = s.g_ref;
    t["data"] = s.data ? json(*s.data) : json(nullptr);
    t["noisy"] = s.noisy;
    t["data_seed"] = s.data_seed ? nlohmann::json(*s.data_seed) : nlohmann::json(nullptr);
  }
  if (spec.target.grid)
    t["grid"] = {{"lower", spec.target.grid->lower}, {"upper", spec.target.grid->upper}, {"bins", spec.target.grid->bins}};
  else
    t["grid"] = nullptr;
  j["target"] = t;

  const auto& run = spec.run;
  j["sampler"] = std::string(to_string(run.sampler));
  j["ensemble_size"] = run.ensemble_size;
  j["iterations"] = run.iterations;
  json k;
  k["kind"] = std::string(to_string(run.kernel.kernel.kind));
  k["beta"] = run.kernel.kernel.beta;
  k["covariance"] = run.kernel.kernel.covariance.empty() ? json(nullptr) : json(run.kernel.kernel.covariance);
  k["scouts"] = {{"count", run.kernel.scout_count}, {"multiplier", run.kernel.scout_multiplier}};
  j["kernel"] = k;
  j["resampler"] = {{"kind", std::string(to_string(run.resampler.kind))}, {"stochastic", run.resampler.stochastic}};
  const auto& a = run.adaptation;
  j["adaptation"] = {{"enabled", a.enabled},       {"n0", a.n0},
                     {"growth", a.growth},         {"beta_lo", a.beta_lo},
                     {"beta_hi", a.beta_hi},       {"resolution", a.resolution},
                     {"overdispersion", a.overdispersion}, {"target_acceptance", a.target_acceptance}};
  const auto& b = run.burn_in;
  j["burn_in"] = {{"mode", std::string(detail::to_string(b.mode))},
                  {"iterations", b.iterations},
                  {"window", b.window},
                  {"slope_fraction", b.slope_fraction},
                  {"rise_fraction", b.rise_fraction}};
  j["seed"] = run.seed;
  j["threads"] = run.threads;
  if (run.initial_states) {
    json rows = json::array();
    for (std::size_t i = 0; i < run.initial_states->size(); ++i) rows.push_back(run.initial_states->row(i));
    j["initial_states"] = rows;
  } else {
    j["initial_states"] = nullptr;
  }
  j["repeats"] = spec.repeats;
  if (spec.sweep) {
    j["sweep"] = {{"count", spec.sweep->count},
                  {"beta_lo", spec.sweep->beta_lo},
                  {"beta_hi", spec.sweep->beta_hi},
                  {"betas", spec.sweep->betas ? json(*spec.sweep->betas) : json(nullptr)}};
  } else {
    j["sweep"] = nullptr;
  }
  j["bench"] = {{"ensemble_sizes", spec.bench.ensemble_sizes}, {"repeats", spec.bench.repeats}};
  j["output"] = {{"directory", spec.output.directory}, {"write_samples", spec.output.write_samples}};
  return j;
}

inline std::string serialize_config(const ExperimentSpec& spec) { return to_json(spec).dump(2); }

/// FNV-1a 64-bit hash of the compact canonical document, as 16 hex digits.
/// Thread count and output location are left out since they do not change results.
inline std::string config_hash(const ExperimentSpec& spec) {
  nlohmann::json doc = to_json(spec);
  doc.erase("threads");
  doc.erase("output");
  const std::string s = doc.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------------------
// Target construction

struct BuiltTarget {
  TargetPosterior posterior;
  /// Observations actually used.
  std::vector<double> data;
  /// Observation times (chemical only).
  std::vector<double> times;
};

/// Builds the posterior named by `spec`. The chemical reference is computed
/// only when `with_reference` is set, since it costs a 2-D quadrature.
inline BuiltTarget build_target(const TargetSpec& spec, std::uint64_t run_seed, bool with_reference = true) {
  BuiltTarget out;
  switch (spec.family) {
    case TargetFamily::gaussian:
    case TargetFamily::bimodal: {
      const auto& s = spec.scalar;
      const double d = s.data ? *s.data : generate_scalar_data(s.g_ref, s.sigma2, s.noisy, s.data_seed.value_or(run_seed));
      out.data = {d};
      if (spec.family == TargetFamily::gaussian)
        out.posterior = make_gaussian_target(s.tau2, s.sigma2, d, spec.grid.value_or(default_gaussian_grid()));
      else
        out.posterior = make_bimodal_target(s.tau2, s.sigma2, d, spec.grid.value_or(default_bimodal_grid()));
      break;
    }
    case TargetFamily::chemical: {
      const auto& c = spec.chemical;
      ChemicalModel m;
      m.k1 = c.k1;
      m.k4 = c.k4;
      m.sigma2 = c.sigma2;
      m.alpha0 = c.alpha0;
      m.beta0 = c.beta0;
      m.obs_times = c.obs_times;
      m.data = c.data ? *c.data
                      : generate_chemical_data(c.k1, c.k2_true, c.k3_true, c.k4, c.obs_times, c.sigma2, c.noisy,
                                               c.data_seed.value_or(run_seed));
      out.data = m.data;
      out.times = m.obs_times;
      out.posterior = make_chemical_target(m);
      if (with_reference)
        out.posterior.reference = chemical_reference(out.posterior, spec.grid.value_or(default_chemical_grid()));
      break;
    }
  }
  return out;
}

/// Seed precedence: command-line flag, then the config file, then PAIS_SEED.
inline std::uint64_t resolve_seed(const ExperimentSpec& spec, std::optional<std::uint64_t> cli_seed) {
  if (cli_seed) return *cli_seed;
  if (spec.seed_from_config) return spec.run.seed;
  if (const char* env = std::getenv("PAIS_SEED")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end && *end == '\0' && end != env) return v;
    throw ConfigError("PAIS_SEED: expected a nonnegative integer");
  }
  return spec.run.seed;
}

}  // namespace pais
