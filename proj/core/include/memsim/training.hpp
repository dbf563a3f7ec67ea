#pragma once

#include <cstdint>
#include <vector>

#include "memsim/analog_net.hpp"
#include "memsim/dataset.hpp"
#include "memsim/network.hpp"

namespace memsim {

struct TrainConfig {
  double lr = 0.05;
  int epochs = 1;
  int batch = 32;
  std::uint64_t seed = 0;
  double val_fraction = 0.1;
  int train_limit = 0;  // cap on training images (0 = all)
  int test_limit = 0;
  AnalogConfig analog;
  bool record_wall_time = false;  // off by default: outputs stay byte-reproducible

  void validate() const;
};

struct EpochMetrics {
  int epoch = 0;
  double loss = 0.0;
  double train_acc = 0.0;  // running accuracy over the epoch's batches
  double val_acc = 0.0;
  double test_acc = 0.0;
  double wall_s = 0.0;
};

struct TrainResult {
  std::vector<EpochMetrics> history;
  int best_val_epoch = 0;            // 1-based epoch with the best val accuracy
  double test_acc_at_best = 0.0;     // model selection on the validation split
  double final_test_acc = 0.0;
  AnalogTrafficCounters traffic;
};

// Deterministic SGD through the configured analog path. Aborts with a
// diagnostic on divergence (non-finite loss).
TrainResult run_training(const NetworkSpec& net, const Dataset& train_set,
                         const Dataset& test_set, const TrainConfig& cfg);

// Accuracy of a network over a dataset (batched forward).
double evaluate_accuracy(const AnalogNetwork& net, const Dataset& data, int batch, int limit = 0);

}  // namespace memsim
