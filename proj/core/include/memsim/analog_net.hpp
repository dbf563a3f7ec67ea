#pragma once

#include <Eigen/Core>
#include <memory>
#include <optional>
#include <vector>

#include "memsim/crossbar.hpp"
#include "memsim/network.hpp"
#include "memsim/periphery.hpp"

namespace memsim {

enum class AnalogPathMode { ideal, nonideal };
enum class AdcMode { calibrated, uniform, exact };

struct QuantizerSettings {
  int input_bits = 8;
  int adc_bits = 5;
  AdcMode adc_mode = AdcMode::calibrated;
  bool per_chip = false;  // one edge set for the whole chip instead of per layer
};

struct AnalogConfig {
  AnalogPathMode mode = AnalogPathMode::ideal;
  DeviceParams device;
  CrossbarConfig xbar;
  QuantizerSettings quant;
  int array_rows = 128;            // row-tile height of one array
  double w_clip_scale = 2.0;       // per-layer clip = scale * init weight limit
  std::int64_t max_cells_per_layer = std::int64_t(1) << 28;
  bool parasitic = false;          // nodal wire-grid solve during reads
  bool backward_target_weights = false;  // ablation: backprop through targets
  double r_sense = 1500.0;         // meminductive sense resistor (ohm)
  double read_pulse_s = 1e-6;      // meminductive read flux window (s)

  AnalogConfig() : device(device_preset("tiox-memristor")) {}
};

// Event counters filled during nonideal forward passes; feeds the cost model.
struct AnalogTrafficCounters {
  double array_reads = 0.0;
  double adc_conversions = 0.0;
};

class AnalogLayer {
 public:
  // blocks = kernel-position sub-matrices (K*K for conv, 1 for dense);
  // each block is an in_rows x cols matrix row-tiled onto arrays.
  AnalogLayer(std::string name, int blocks, int in_rows, int cols, const AnalogConfig& cfg,
              double init_limit, Rng& rng);

  const std::string& name() const { return name_; }
  int blocks() const { return blocks_; }
  int in_rows() const { return in_rows_; }
  int cols() const { return cols_; }
  int stacked_rows() const { return blocks_ * in_rows_; }
  double w_clip() const { return w_clip_; }
  double pulse_step() const { return step_; }

  const Eigen::MatrixXd& target_weights() const { return w_float_; }
  Eigen::MatrixXd& target_weights() { return w_float_; }
  const Eigen::MatrixXd& effective_weights() const;

  // Weight-unit matmul through the configured analog path. X is
  // (samples x stacked_rows); calibrates the ADC on first use.
  Eigen::MatrixXd analog_matmul(const Eigen::MatrixXd& x, AnalogTrafficCounters* traffic) const;

  // Exact partial-sum samples for ADC calibration (no quantization).
  void collect_calibration_samples(const Eigen::MatrixXd& x, std::vector<double>& out) const;
  void set_quantizer(const QuantizerConfig& q);
  bool quantizer_ready() const { return quant_ready_; }

  // Program the signed weight delta as device pulses, with sub-step
  // residual accumulation. No-op for the ideal path (weights update in
  // software there).
  void apply_update(const Eigen::MatrixXd& delta_w, Rng& rng);

  // Software weight update for the ideal path.
  void apply_update_ideal(const Eigen::MatrixXd& delta_w);

  const CrossbarArray& array_at(int block, int tile) const;
  int tiles() const { return static_cast<int>(tile_rows_.size()); }
  const Eigen::MatrixXd& residuals() const { return residual_; }

 private:
  void refresh_effective() const;
  void rebuild_solvers() const;

  std::string name_;
  int blocks_ = 1;
  int in_rows_ = 0;
  int cols_ = 0;
  AnalogConfig cfg_;
  double w_clip_ = 1.0;
  double step_ = 0.0;
  WeightMapping mapping_;

  Eigen::MatrixXd w_float_;   // stacked (blocks*in_rows) x cols target weights
  Eigen::MatrixXd residual_;  // pulse-rounding remainders
  std::vector<std::pair<int, int>> tile_rows_;            // (row0, rows) within a block
  std::vector<std::vector<CrossbarArray>> arrays_;        // [block][tile]
  mutable std::vector<std::vector<std::unique_ptr<ParasiticSolver>>> solvers_;
  mutable Eigen::MatrixXd w_eff_;
  mutable bool eff_dirty_ = true;
  QuantizerConfig quant_;
  BulkQuantizer bulk_quant_;
  bool quant_ready_ = false;
};

struct ForwardCache {
  // Per layer: the matmul input (im2col for conv), post-linear values and
  // masks needed for backprop.
  struct LayerCache {
    Eigen::MatrixXd x_col;         // samples x stacked_rows
    Eigen::MatrixXd z;             // samples x cols (pre-activation)
    Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> relu_mask;
    std::vector<int> pool_argmax;  // flat indices into the pre-pool map
    Shape3 in_shape, conv_shape, out_shape;
  };
  std::vector<LayerCache> layers;
  Eigen::MatrixXd logits;  // batch x classes
};

class AnalogNetwork {
 public:
  AnalogNetwork(NetworkSpec spec, AnalogConfig cfg, Rng& rng);

  const NetworkSpec& spec() const { return spec_; }
  const AnalogConfig& config() const { return cfg_; }
  std::vector<AnalogLayer>& layers() { return layers_; }
  const std::vector<AnalogLayer>& layers() const { return layers_; }

  // batch: samples x input_size (h*w*c, channel-minor).
  Eigen::MatrixXd forward(const Eigen::MatrixXd& batch, ForwardCache* cache = nullptr) const;

  // Cross-entropy loss and accuracy of logits.
  static double softmax_cross_entropy(const Eigen::MatrixXd& logits,
                                      const std::vector<int>& labels, Eigen::MatrixXd* dlogits);
  static double accuracy(const Eigen::MatrixXd& logits, const std::vector<int>& labels);

  // Weight gradients for every layer (stacked layout), via the cached
  // forward intermediates.
  std::vector<Eigen::MatrixXd> backward(const ForwardCache& cache,
                                        const std::vector<int>& labels) const;

  // SGD step: ideal path updates software weights; nonideal path programs
  // pulses through the device model.
  void apply_gradients(const std::vector<Eigen::MatrixXd>& grads, double lr, Rng& rng);

  // Calibrate every layer's ADC from a representative batch (per layer or
  // chip-wide per config).
  void calibrate(const Eigen::MatrixXd& batch);

  AnalogTrafficCounters traffic() const { return traffic_; }
  void reset_traffic() { traffic_ = {}; }

 private:
  struct ConvGeometry {
    Shape3 in, conv, out;   // input, post-conv, post-pool shapes
    std::vector<int> gather;  // (positions * K*K) -> input plane index or -1
    int positions = 0;
  };

  Eigen::MatrixXd layer_input_columns(std::size_t li, const Eigen::MatrixXd& input,
                                      int batch) const;

  NetworkSpec spec_;
  AnalogConfig cfg_;
  std::vector<AnalogLayer> layers_;
  std::vector<ConvGeometry> geom_;  // parallel to layers_ (conv entries only meaningful)
  mutable AnalogTrafficCounters traffic_;
};

}  // namespace memsim
