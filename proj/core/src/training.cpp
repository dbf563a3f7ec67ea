#include "memsim/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace memsim {

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw std::invalid_argument("train: learning rate > 0 required");
  if (epochs < 0) throw std::invalid_argument("train: epochs >= 0 required");
  if (batch < 1) throw std::invalid_argument("train: batch >= 1 required");
  if (val_fraction < 0.0 || val_fraction >= 1.0) {
    throw std::invalid_argument("train: val_fraction in [0, 1)");
  }
}

namespace {

Eigen::MatrixXd batch_matrix(const Dataset& d, const std::vector<int>& idx, std::size_t lo,
                             std::size_t hi) {
  const int pix = d.pixels_per_image();
  Eigen::MatrixXd m(static_cast<Eigen::Index>(hi - lo), pix);
  for (std::size_t k = lo; k < hi; ++k) {
    const float* img = d.image(idx[k]);
    for (int p = 0; p < pix; ++p) m(static_cast<Eigen::Index>(k - lo), p) = img[p];
  }
  return m;
}

std::vector<int> batch_labels(const Dataset& d, const std::vector<int>& idx, std::size_t lo,
                              std::size_t hi) {
  std::vector<int> out;
  out.reserve(hi - lo);
  for (std::size_t k = lo; k < hi; ++k) out.push_back(d.labels[static_cast<std::size_t>(idx[k])]);
  return out;
}

void shuffle_indices(std::vector<int>& idx, Rng& rng) {
  for (std::size_t i = idx.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.uniform() * static_cast<double>(i));
    std::swap(idx[i - 1], idx[std::min(j, i - 1)]);
  }
}

double eval_on_indices(const AnalogNetwork& net, const Dataset& d, const std::vector<int>& idx,
                       int batch) {
  if (idx.empty()) return 0.0;
  int hits = 0;
  for (std::size_t lo = 0; lo < idx.size(); lo += static_cast<std::size_t>(batch)) {
    const std::size_t hi = std::min(idx.size(), lo + static_cast<std::size_t>(batch));
    const Eigen::MatrixXd x = batch_matrix(d, idx, lo, hi);
    const std::vector<int> y = batch_labels(d, idx, lo, hi);
    const Eigen::MatrixXd logits = net.forward(x);
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
      Eigen::Index arg = 0;
      logits.row(i).maxCoeff(&arg);
      hits += arg == y[static_cast<std::size_t>(i)];
    }
  }
  return static_cast<double>(hits) / static_cast<double>(idx.size());
}

}  // namespace

double evaluate_accuracy(const AnalogNetwork& net, const Dataset& data, int batch, int limit) {
  const int n = limit > 0 ? std::min(limit, data.count) : data.count;
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  return eval_on_indices(net, data, idx, batch);
}

TrainResult run_training(const NetworkSpec& net_spec, const Dataset& train_set,
                         const Dataset& test_set, const TrainConfig& cfg) {
  cfg.validate();
  net_spec.validate();
  if (train_set.count < 1) throw std::invalid_argument("train: empty training set");

  Rng root(cfg.seed);
  Rng init_rng = root.split(1);
  Rng shuffle_rng = root.split(2);
  Rng program_rng = root.split(3);

  AnalogNetwork net(net_spec, cfg.analog, init_rng);

  // Train/validation split from a deterministic shuffle.
  const int n_train_total = cfg.train_limit > 0 ? std::min(cfg.train_limit, train_set.count)
                                                : train_set.count;
  std::vector<int> order(static_cast<std::size_t>(n_train_total));
  std::iota(order.begin(), order.end(), 0);
  {
    Rng split_rng = root.split(4);
    shuffle_indices(order, split_rng);
  }
  const int n_val = static_cast<int>(std::lround(cfg.val_fraction * n_train_total));
  std::vector<int> val_idx(order.begin(), order.begin() + n_val);
  std::vector<int> train_idx(order.begin() + n_val, order.end());
  if (train_idx.empty()) throw std::invalid_argument("train: no samples left after split");

  std::vector<int> test_idx(static_cast<std::size_t>(
      cfg.test_limit > 0 ? std::min(cfg.test_limit, test_set.count) : test_set.count));
  std::iota(test_idx.begin(), test_idx.end(), 0);

  // Calibrate the ADC once on the first training batch.
  if (cfg.analog.mode == AnalogPathMode::nonideal &&
      cfg.analog.quant.adc_mode != AdcMode::exact) {
    const std::size_t hi = std::min(train_idx.size(), static_cast<std::size_t>(cfg.batch) * 4);
    net.calibrate(batch_matrix(train_set, train_idx, 0, hi));
  }

  TrainResult result;
  double best_val = -1.0;
  const auto t0 = std::chrono::steady_clock::now();

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Rng epoch_shuffle = shuffle_rng.split(static_cast<std::uint64_t>(epoch));
    shuffle_indices(train_idx, epoch_shuffle);

    double loss_sum = 0.0;
    std::size_t loss_batches = 0;
    std::size_t hit = 0, seen = 0;
    for (std::size_t lo = 0; lo < train_idx.size(); lo += static_cast<std::size_t>(cfg.batch)) {
      const std::size_t hi = std::min(train_idx.size(), lo + static_cast<std::size_t>(cfg.batch));
      const Eigen::MatrixXd x = batch_matrix(train_set, train_idx, lo, hi);
      const std::vector<int> y = batch_labels(train_set, train_idx, lo, hi);

      ForwardCache cache;
      net.forward(x, &cache);
      Eigen::MatrixXd dlogits;
      const double loss = AnalogNetwork::softmax_cross_entropy(cache.logits, y, &dlogits);
      if (!std::isfinite(loss)) {
        throw std::runtime_error("training diverged (non-finite loss) at epoch " +
                                 std::to_string(epoch));
      }
      loss_sum += loss;
      ++loss_batches;
      for (Eigen::Index i = 0; i < cache.logits.rows(); ++i) {
        Eigen::Index arg = 0;
        cache.logits.row(i).maxCoeff(&arg);
        hit += arg == y[static_cast<std::size_t>(i)];
      }
      seen += y.size();

      const std::vector<Eigen::MatrixXd> grads = net.backward(cache, y);
      Rng batch_rng = program_rng.split((static_cast<std::uint64_t>(epoch) << 32) + lo);
      net.apply_gradients(grads, cfg.lr, batch_rng);
    }

    EpochMetrics m;
    m.epoch = epoch;
    m.loss = loss_sum / static_cast<double>(std::max<std::size_t>(loss_batches, 1));
    m.train_acc = seen ? static_cast<double>(hit) / static_cast<double>(seen) : 0.0;
    m.val_acc = val_idx.empty() ? 0.0 : eval_on_indices(net, train_set, val_idx, cfg.batch);
    m.test_acc = eval_on_indices(net, test_set, test_idx, cfg.batch);
    if (cfg.record_wall_time) {
      m.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
    result.history.push_back(m);

    const double val_score = val_idx.empty() ? m.test_acc : m.val_acc;
    if (val_score > best_val) {
      best_val = val_score;
      result.best_val_epoch = epoch;
      result.test_acc_at_best = m.test_acc;
    }
    result.final_test_acc = m.test_acc;
  }

  if (cfg.epochs == 0) {
    // Untrained network: still report the chance-level accuracies.
    EpochMetrics m;
    m.epoch = 0;
    m.val_acc = val_idx.empty() ? 0.0 : eval_on_indices(net, train_set, val_idx, cfg.batch);
    m.test_acc = eval_on_indices(net, test_set, test_idx, cfg.batch);
    result.history.push_back(m);
    result.test_acc_at_best = m.test_acc;
    result.final_test_acc = m.test_acc;
  }

  result.traffic = net.traffic();
  return result;
}

}  // namespace memsim
