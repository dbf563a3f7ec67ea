#pragma once

#include <stdexcept>
#include <string>

#include "memsim/costmodel.hpp"
#include "memsim/meminductor.hpp"
#include "memsim/training.hpp"

namespace memsim {

// Invalid or unknown configuration; the CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct HysteresisSection {
  double v_m = 0.5;
  double freq_hz = 3e6;
  int cycles = 6;
  int steps_per_cycle = 2000;
};

struct SweepSection {
  std::string param = "freq_hz";  // freq_hz | v_m | gm_scale | v_t_delta
  std::vector<double> values;
  HysteresisSection base;
};

struct AmoebaSection {
  double r_ohm = 1000.0;
  double c_farad = 10e-12;
  double baseline_v = 0.0;
  double dip_depth_v = 0.5;
  double dip_period_s = 2e-4;
  double dip_width_s = 4e-5;
  double duration_s = 1e-3;
  double dt_s = 2e-8;
  double gm3_scale = 1e-7;  // 0 freezes the meminductance
};

struct CostSection {
  std::string network = "vgg8";
  double samples = 1.0;
  int input_bits = 8;
  int adc_bits = 5;
  int array_size = 128;
};

struct VmmBenchSection {
  int rows = 64;
  int cols = 64;
  int cases = 20;
  std::vector<double> r_line_values{0.0, 0.5, 2.0};
};

struct TrainSection {
  std::string network = "mnist-cnn";  // mnist-cnn | mnist-mlp | vgg8
  int hidden = 64;                    // mnist-mlp width
  std::string dataset_dir;            // expects the four standard idx files
  std::string train_images, train_labels, test_images, test_labels;
  bool dump_calibration = false;      // write the ADC calibration samples CSV
  TrainConfig train;
};

struct ExperimentConfig {
  std::string experiment;  // train | vmm-bench | hysteresis | sweep | amoeba | cost
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  int threads = 0;  // worker cap for sweeps; 0 = hardware default
  bool long_run = false;

  DeviceParams device;
  MeminductorParams meminductor;
  HysteresisSection hysteresis;
  SweepSection sweep;
  AmoebaSection amoeba;
  CostSection cost;
  VmmBenchSection vmm;
  TrainSection training;
  TechConfig tech;

  std::string resolved_json;  // full config with defaults applied, stable key order
};

// Parse and validate a config file. Unknown keys anywhere are an error and
// are listed in the exception message.
ExperimentConfig load_experiment_config(const std::string& path);
ExperimentConfig parse_experiment_config_text(const std::string& json_text);

// Apply a command-line seed override, keeping the resolved config (and so
// the manifest hash) in sync.
void override_seed(ExperimentConfig& config, std::uint64_t seed);

}  // namespace memsim
