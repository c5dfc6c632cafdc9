// srheatlab: runs rounding-error experiments for the heat equation and
// writes one CSV row per (configuration, measure).
//
// Exit status: 0 on success, 1 when some cells failed (their rows are marked
// "failed"), 2 on usage or configuration errors, 3 on output errors.

#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <vector>

#include "srheat/cli/config.hpp"
#include "srheat/cli/csv.hpp"
#include "srheat/cli/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Rounding-error experiments for the heat equation in low precision"};
  std::string subcommand, config_path, out_path;
  std::vector<std::string> overrides;
  bool plot_data = false;
  app.add_option("subcommand", subcommand, "solution | local | global | lambda-sweep | bounds | rates")
      ->required();
  app.add_option("--config", config_path, "key=value configuration file");
  app.add_option("--set", overrides, "override one key, e.g. --set h=2^-5,2^-6")->expected(1)->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  app.add_option("--out", out_path, "output CSV path")->required();
  app.add_flag("--plot-data", plot_data, "also write <stem>.<series>.xy files next to the CSV");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  srheat::cli::ExperimentConfig cfg;
  try {
    const auto sub = srheat::cli::parse_subcommand(subcommand);
    srheat::cli::ConfigMap map;
    if (!config_path.empty()) map.parse_file(config_path);
    for (const auto& kv : overrides) map.set_override(kv);
    cfg = srheat::cli::make_config(sub, map);
  } catch (const std::exception& e) {
    std::cerr << "srheatlab: " << e.what() << '\n';
    return 2;
  }

  srheat::cli::ExperimentOutput result;
  try {
    result = srheat::cli::run_experiment(cfg);
  } catch (const std::exception& e) {
    std::cerr << "srheatlab: " << e.what() << '\n';
    return 2;
  }
  for (const auto& msg : result.errors) std::cerr << "srheatlab: " << msg << '\n';

  try {
    srheat::cli::write_csv(result.rows, out_path);
    if (plot_data) srheat::cli::write_plot_data(result.series, out_path);
  } catch (const std::exception& e) {
    std::cerr << "srheatlab: " << e.what() << '\n';
    return 3;
  }
  return result.errors.empty() ? 0 : 1;
}
