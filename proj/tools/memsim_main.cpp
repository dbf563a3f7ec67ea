#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "memsim/config.hpp"
#include "memsim/experiments.hpp"

int main(int argc, char** argv) {
  CLI::App app{"memsim - mem-element compute-in-memory simulator"};
  app.set_version_flag("--version", std::string(memsim::kVersion));

  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out_dir;
  int threads = -1;
  bool long_run = false;

  app.add_option("--config", config_path, "experiment config file (JSON)")->required();
  app.add_option("--seed", seed, "override the config seed");
  app.add_flag("--long-run", long_run, "unlock long-running configurations (CIFAR-10 / VGG-8)");
  app.add_option("--out", out_dir, "override the output directory");
  app.add_option("--threads", threads, "worker cap for sweep experiments");

  CLI11_PARSE(app, argc, argv);
  seed_set = app.count("--seed") > 0;

  try {
    memsim::ExperimentConfig cfg = memsim::load_experiment_config(config_path);
    if (seed_set) memsim::override_seed(cfg, seed);
    if (const char* env_out = std::getenv("MEMSIM_OUT_DIR"); env_out && out_dir.empty()) {
      out_dir = env_out;
    }
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (const char* env_threads = std::getenv("MEMSIM_THREADS"); env_threads && threads < 0) {
      threads = std::atoi(env_threads);
    }
    if (threads >= 0) cfg.threads = threads;
    cfg.long_run = long_run;

    const memsim::ExperimentResult result = memsim::run_experiment(cfg);
    std::cout << result.summary << "\n";
    for (const auto& f : result.files) std::cout << "wrote " << f << "\n";
    return 0;
  } catch (const memsim::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
