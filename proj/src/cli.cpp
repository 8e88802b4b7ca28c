#include <algorithm>
#include <cstdio>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "svi/bench.hpp"

namespace svi {

namespace {

std::vector<double> parse_h_list(const std::string& text) {
  std::vector<double> h;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      size_t used = 0;
      h.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("--h: not a number: '" + item + "'");
    }
  }
  return h;
}

int cmd_presets() {
  for (const auto& name : preset_names()) {
    const SystemSpec s = preset(name);
    std::printf("%-24s T=%g  %s\n", name.c_str(), s.t_final, s.describe_parameters().c_str());
  }
  return 0;
}

int cmd_slope(const std::string& csv, bool coarse_half) {
  auto records = read_convergence_csv(csv);
  std::sort(records.begin(), records.end(),
            [](const auto& a, const auto& b) { return a.h > b.h; });
  if (coarse_half) records.resize((records.size() + 1) / 2);
  std::printf("%.6f\n", fit_convergence_slope(records));
  return 0;
}

int cmd_run(const ExperimentConfig& cfg) {
  const ExperimentResult res = run_experiment(cfg);
  for (const auto& run : res.runs) {
    std::printf("%s %s (benchmark: %s%s%s)\n", cfg.system.c_str(), run.integrator.c_str(),
                res.benchmark_mode.c_str(), res.benchmark_cache.empty() ? "" : ", cache ",
                res.benchmark_cache.c_str());
    for (const auto& r : run.records)
      std::printf("  h=%-10.4g e_l2=%-12.6e time=%.4es\n", r.h, r.e_l2, r.time_mean_s);
    if (!run.records.empty() && run.records[0].slope)
      std::printf("  slope=%.4f\n", *run.records[0].slope);
    std::printf("  -> %s\n", run.csv.string().c_str());
  }
  return 0;
}

}  // namespace

int cli_main(int argc, char** argv) {
  CLI::App app{"Convergence and timing experiments for midpoint variational integrators"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run an experiment config");
  run->set_help_flag("--help", "Print this help message and exit");
  std::string config_path;
  std::string system, h_list, out, benchmark, benchmark_integrator;
  std::vector<std::string> integrators;
  double t_final = 0.0, eps_tol = 0.0, benchmark_h = 0.0;
  int reps = 0;
  run->add_option("config", config_path, "JSON experiment config")->check(CLI::ExistingFile);
  auto* o_system = run->add_option("--system", system, "System preset name");
  auto* o_integ = run->add_option("--integrator", integrators,
                                  "Integrator id; repeat for several")->delimiter(';');
  auto* o_h = run->add_option("--h", h_list, "Comma-separated step sizes");
  auto* o_tf = run->add_option("--t-final", t_final, "Final time");
  auto* o_eps = run->add_option("--eps-tol", eps_tol, "Newton tolerance");
  auto* o_reps = run->add_option("--reps", reps, "Timed repetitions");
  auto* o_out = run->add_option("--out", out, "Output directory");
  auto* o_bh = run->add_option("--benchmark-h", benchmark_h, "Self-benchmark step size");
  auto* o_bm = run->add_option("--benchmark", benchmark, "analytic | self");
  auto* o_bi = run->add_option("--benchmark-integrator", benchmark_integrator,
                               "Integrator for the self-benchmark");

  app.add_subcommand("presets", "List system presets");

  auto* slope = app.add_subcommand("slope", "Fit the convergence slope of a result CSV");
  std::string csv;
  bool coarse_half = false;
  slope->add_option("csv", csv, "Result CSV")->required();
  slope->add_flag("--coarse-half", coarse_half, "Use only the larger half of the step sizes");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (app.got_subcommand("presets")) return cmd_presets();
    if (app.got_subcommand("slope")) return cmd_slope(csv, coarse_half);

    ExperimentConfig cfg;
    if (!config_path.empty()) cfg = ExperimentConfig::from_file(config_path);
    if (*o_system) cfg.system = system;
    if (*o_integ) cfg.integrators = integrators;
    if (*o_h) cfg.h = parse_h_list(h_list);
    if (*o_tf) cfg.t_final = t_final;
    if (*o_eps) cfg.eps_tol = eps_tol;
    if (*o_reps) cfg.reps = reps;
    if (*o_out) cfg.out = out;
    if (*o_bh) cfg.benchmark_h = benchmark_h;
    if (*o_bm) cfg.benchmark = benchmark;
    if (*o_bi) cfg.benchmark_integrator = benchmark_integrator;
    return cmd_run(cfg);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "svibench: configuration error: %s\n", e.what());
    return 2;
  } catch (const InsufficientData& e) {
    std::fprintf(stderr, "svibench: %s\n", e.what());
    return 1;
  } catch (const Error& e) {
    if (e.step_index())
      std::fprintf(stderr, "svibench: integration failed at step %ld: %s\n", *e.step_index(),
                   e.what());
    else
      std::fprintf(stderr, "svibench: integration failed: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "svibench: %s\n", e.what());
    return 1;
  }
}

}  // namespace svi
