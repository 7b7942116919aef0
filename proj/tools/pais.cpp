// Command-line runner: pais <run|tune|bench-resamplers|generate-data> --config <path>
#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "pais/pais.hpp"

namespace {

int dispatch(const std::string& command, const std::string& config_path, const pais::CommandOptions& opt) {
  const pais::ExperimentSpec spec = pais::apply_overrides(pais::parse_config(config_path), opt);
  if (command == "run") {
    const auto results = pais::cmd_run(spec);
    for (const auto& r : results) {
      std::cout << "iterations=" << r.summary.iterations << " burn_in=" << r.summary.burn_in
                << " mean_ess=" << pais::format_double(r.summary.mean_ess);
      if (std::isfinite(r.summary.l2_error)) std::cout << " l2_error=" << pais::format_double(r.summary.l2_error);
      std::cout << '\n';
    }
  } else if (command == "tune") {
    const auto t = pais::cmd_tune(spec);
    std::cout << "beta_star=" << pais::format_double(t.beta_star) << '\n';
  } else if (command == "bench-resamplers") {
    for (const auto& r : pais::cmd_bench_resamplers(spec))
      std::cout << r.ensemble_size << ' ' << r.scheme << " err_m2=" << pais::format_double(r.error[1])
                << " seconds=" << pais::format_double(r.seconds) << '\n';
  } else if (command == "generate-data") {
    const auto t = pais::cmd_generate_data(spec);
    std::cout << t.data.size() << " observations\n";
  }
  std::cout << "output: " << spec.output.directory << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Parallel adaptive importance sampling experiments"};
  app.require_subcommand(1);
  std::string config;
  pais::CommandOptions opt;
  std::uint64_t seed = 0;
  std::string out;
  std::size_t threads = 1;
  std::vector<CLI::App*> subs;
  for (const char* name : {"run", "tune", "bench-resamplers", "generate-data"}) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config, "experiment JSON file")->required();
    sub->add_option("--seed", seed, "random seed (overrides the config)");
    sub->add_option("--out", out, "output directory (overrides the config)");
    sub->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
    subs.push_back(sub);
  }
  CLI11_PARSE(app, argc, argv);
  for (CLI::App* sub : subs) {
    if (!sub->parsed()) continue;
    if (sub->count("--seed")) opt.seed = seed;
    if (sub->count("--out")) opt.out = out;
    if (sub->count("--threads")) opt.threads = threads;
    try {
      return dispatch(sub->get_name(), config, opt);
    } catch (const pais::ConfigError& e) {
      std::cerr << "config error: " << e.what() << '\n';
      return 2;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << '\n';
      return 1;
    }
  }
  return 1;
}
