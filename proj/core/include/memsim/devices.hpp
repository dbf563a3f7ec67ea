#pragma once

#include <string>
#include <vector>

#include "memsim/rng.hpp"

namespace memsim {

// Programmable analog cell families. State units depend on the family:
// siemens (memristor), farads (memcapacitor), inverse henries (meminductor
// emulator cell used by the meminductor VMM backend).
enum class DeviceKind { memristor, memcapacitor, meminductor };

const char* to_string(DeviceKind kind);
DeviceKind device_kind_from_string(const std::string& name);

struct DeviceParams {
  double x_min = 0.0;      // analog state floor
  double x_max = 0.0;      // analog state ceiling
  int p_max = 1;           // pulses between extremes
  double a_ltp = 1.0;      // nonlinearity factor, potentiation
  double a_ltd = 1.0;      // nonlinearity factor, depression
  double sigma_d2d = 0.0;  // relative std of the per-device nonlinearity factor
  double sigma_c2c = 0.0;  // per-pulse state noise, fraction of (x_max - x_min)
  double stuck_prob = 0.0;
  DeviceKind kind = DeviceKind::memristor;

  double range() const { return x_max - x_min; }
  void validate() const;  // throws std::invalid_argument
};

struct DeviceState {
  double x = 0.0;            // current analog state
  double a = 1.0;            // sampled LTP nonlinearity factor of this device
  bool stuck = false;
  double stuck_value = 0.0;

  // Depression factor keeps the sampled deviation but follows the
  // configured LTP/LTD asymmetry ratio.
  double a_for(const DeviceParams& p, bool ltd) const {
    return ltd ? a * (p.a_ltd / p.a_ltp) : a;
  }
};

enum class PulseDirection { ltp, ltd };

// State after p programming pulses from the curve origin (x_min for LTP,
// x_max for LTD; LTD counts depression pulses from the x_max end). p may be
// fractional when resuming mid-curve.
double weight_update_curve(double p, PulseDirection dir, const DeviceParams& params, double a);

// Pulse position p such that weight_update_curve(p, dir, params, a) == x.
double invert_curve(double x, PulseDirection dir, const DeviceParams& params, double a);

// Advance a device by n signed pulses (n > 0 potentiates, n < 0 depresses),
// applying cycle-to-cycle noise. Stuck devices never move.
DeviceState apply_pulses(DeviceState state, int n, const DeviceParams& params, Rng& rng);

class DevicePopulation {
 public:
  DevicePopulation() = default;
  DevicePopulation(int rows, int cols);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  DeviceState& at(int r, int c) { return cells_[static_cast<std::size_t>(r) * cols_ + c]; }
  const DeviceState& at(int r, int c) const {
    return cells_[static_cast<std::size_t>(r) * cols_ + c];
  }
  std::vector<DeviceState>& cells() { return cells_; }
  const std::vector<DeviceState>& cells() const { return cells_; }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<DeviceState> cells_;
};

// Fresh array at x_min with per-device nonlinearity factors drawn from
// Normal(a_ltp, sigma_d2d * a_ltp) truncated positive and stuck flags drawn
// with stuck_prob. Stuck cells freeze at the nearest endpoint (x_min for a
// fresh array).
DevicePopulation sample_population(const DeviceParams& params, int rows, int cols, Rng& rng);

// Named parameter sets. "tiox-memristor" and "si-memcapacitor" carry the
// measured endpoint states; "ota-meminductor" covers the emulator-backed
// VMM cells.
DeviceParams device_preset(const std::string& name);
std::vector<std::string> device_preset_names();

}  // namespace memsim
