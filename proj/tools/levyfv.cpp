#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "levyfv/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"levyfv: Monte Carlo and exact checks for first-passage fluctuation identities"};
  app.require_subcommand(0, 1);

  std::string config_path, out_dir;
  std::uint64_t seed = 0;
  unsigned workers = 0;
  app.add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
  auto* seed_opt = app.add_option("--seed", seed, "override the config seed");
  app.add_option("--workers", workers, "worker threads (default: hardware concurrency)");
  auto* out_opt = app.add_option("--out", out_dir, "results directory (default: config output)");

  std::string results_dir;
  auto* plot = app.add_subcommand("plotdata", "write long-format plot CSVs from a results directory");
  plot->add_option("results_dir", results_dir, "results directory")->required();

  CLI11_PARSE(app, argc, argv);

  if (*plot) {
    try {
      for (const auto& f : levyfv::cli::report_plotdata(results_dir)) std::cout << "wrote " << f << '\n';
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << '\n';
      return 2;
    }
    return 0;
  }
  if (config_path.empty()) {
    std::cerr << "error: --config is required\n" << app.help();
    return 2;
  }
  try {
    const auto cfg = levyfv::cli::load_config(config_path);
    levyfv::cli::RunOptions opt;
    opt.seed = *seed_opt ? seed : cfg.seed;
    opt.workers = workers ? workers : std::max(1u, std::thread::hardware_concurrency());
    opt.out_dir = *out_opt ? out_dir : cfg.output;
    return levyfv::cli::run(cfg, opt).exit_status;
  } catch (const levyfv::cli::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
}
