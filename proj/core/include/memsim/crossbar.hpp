#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCholesky>
#include <memory>
#include <string>

#include "memsim/devices.hpp"

namespace memsim {

enum class ArrayKind { memristive, memcapacitive, meminductive };

ArrayKind array_kind_for(DeviceKind kind);

// Linear map between weight values and target device states
// (w_min -> s_off, w_max -> s_on).
struct WeightMapping {
  double w_min = 0.0;
  double w_max = 1.0;
  double s_on = 1.0;
  double s_off = 0.0;

  void validate() const;
  double state_scale() const { return (s_on - s_off) / (w_max - w_min); }
};

// Target state for a weight value.
double target_state(double w, const WeightMapping& mapping);
// Inverse of target_state.
double weight_from_state(double s, const WeightMapping& mapping);

struct CrossbarConfig {
  double r_line = 0.0;   // wire resistance per cell-to-cell segment, ohms
  double v_read = 0.1;   // read voltage, volts
  bool one_t_one_r = false;          // access device: rows driven at 0 V are disconnected
  double memcap_attenuation = 1.0;   // scalar attenuation standing in for capacitive parasitics

  void validate() const;
};

// Differential crossbar: each signed weight occupies a (positive, negative)
// device pair on matching row/column positions.
class CrossbarArray {
 public:
  CrossbarArray() = default;
  CrossbarArray(DevicePopulation pos, DevicePopulation neg, DeviceParams params,
                WeightMapping mapping, CrossbarConfig config);

  int rows() const { return pos_.rows(); }
  int cols() const { return pos_.cols(); }
  ArrayKind kind() const { return array_kind_for(params_.kind); }

  DevicePopulation& pos() { return pos_; }
  const DevicePopulation& pos() const { return pos_; }
  DevicePopulation& neg() { return neg_; }
  const DevicePopulation& neg() const { return neg_; }
  const DeviceParams& params() const { return params_; }
  const WeightMapping& mapping() const { return mapping_; }
  const CrossbarConfig& config() const { return config_; }

  // Device state matrices (rows x cols).
  Eigen::MatrixXd pos_states() const;
  Eigen::MatrixXd neg_states() const;

 private:
  DevicePopulation pos_;
  DevicePopulation neg_;
  DeviceParams params_;
  WeightMapping mapping_;
  CrossbarConfig config_;
};

// Program a signed weight matrix onto a fresh differential array. The
// positive part of each weight lands on the positive device, the magnitude
// of the negative part on the negative device; programming goes through
// apply_pulses so level quantization, C2C noise and stuck cells all apply.
// The mapping range must contain 0 for the differential scheme.
CrossbarArray map_weights(const Eigen::MatrixXd& w, const WeightMapping& mapping,
                          const DeviceParams& params, const CrossbarConfig& config, Rng& rng);

// Reprogram an existing array toward a new weight matrix (used by tests and
// diagnostics; training applies pulse deltas directly).
void reprogram(CrossbarArray& array, const Eigen::MatrixXd& w, Rng& rng);

// Column outputs with ideal wires: currents (memristive), charge per read
// (memcapacitive, optionally attenuated), or currents at the flux read
// point (meminductive).
Eigen::VectorXd ideal_vmm(const CrossbarArray& array, const Eigen::VectorXd& v);

// Column currents from full nodal analysis of the resistive grid: every
// device sits between its row and column wire, r_line joins adjacent nodes,
// rows are driven from the left edge, columns sensed at virtual ground at
// the bottom edge. Memristive arrays only.
Eigen::VectorXd parasitic_vmm(const CrossbarArray& array, const Eigen::VectorXd& v);

// Effective signed weights: differential state rescaled to weight units.
Eigen::MatrixXd read_effective_weights(const CrossbarArray& array);

// Full nodal solution of one polarity's wire grid, for diagnostics and
// conservation checks.
struct GridSolution {
  Eigen::MatrixXd row_voltage;  // rows x cols
  Eigen::MatrixXd col_voltage;  // rows x cols
  Eigen::VectorXd column_currents;
};
GridSolution parasitic_grid_solution(const CrossbarArray& array, const Eigen::VectorXd& v,
                                     bool negative_side = false);

// Exact column-current transfer matrix of the parasitic grid for repeated
// reads against fixed device states: the grid is linear in the drive, so
// I = T v with T recovered from one adjoint solve per sense column.
// Rebuild after reprogramming. Not usable with one_t_one_r (the grid then
// depends on the input pattern).
class ParasiticSolver {
 public:
  explicit ParasiticSolver(const CrossbarArray& array);
  // One column-current vector per input column.
  Eigen::MatrixXd solve(const Eigen::MatrixXd& v_columns) const;
  const Eigen::MatrixXd& transfer() const { return t_diff_; }

 private:
  Eigen::MatrixXd t_diff_;  // cols x rows, positive minus negative polarity
  int rows_ = 0, cols_ = 0;
};

// Snapshot I/O: params/mapping/config header plus row-major state matrices.
// Format "csv" is the documented text dump, "bin" the bit-exact binary dump.
void save_snapshot(const CrossbarArray& array, const std::string& path, const std::string& format);
CrossbarArray load_snapshot(const std::string& path);

}  // namespace memsim
