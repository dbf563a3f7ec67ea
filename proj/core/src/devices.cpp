#include "memsim/devices.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace memsim {

const char* to_string(DeviceKind kind) {
  switch (kind) {
    case DeviceKind::memristor: return "memristor";
    case DeviceKind::memcapacitor: return "memcapacitor";
    case DeviceKind::meminductor: return "meminductor";
  }
  return "?";
}

DeviceKind device_kind_from_string(const std::string& name) {
  if (name == "memristor") return DeviceKind::memristor;
  if (name == "memcapacitor") return DeviceKind::memcapacitor;
  if (name == "meminductor") return DeviceKind::meminductor;
  throw std::invalid_argument("unknown device kind: " + name);
}

void DeviceParams::validate() const {
  if (!(x_max > x_min) || !(x_min > 0.0)) {
    throw std::invalid_argument("device params: require x_max > x_min > 0");
  }
  if (p_max < 1) throw std::invalid_argument("device params: p_max >= 1");
  if (!(a_ltp > 0.0) || !(a_ltd > 0.0)) {
    throw std::invalid_argument("device params: nonlinearity factors must be > 0");
  }
  if (sigma_d2d < 0.0 || sigma_c2c < 0.0) {
    throw std::invalid_argument("device params: sigmas must be >= 0");
  }
  if (stuck_prob < 0.0 || stuck_prob > 1.0) {
    throw std::invalid_argument("device params: stuck_prob in [0,1]");
  }
}

namespace {

void check_curve_args(double p, const DeviceParams& params, double a) {
  if (!std::isfinite(p)) throw std::domain_error("pulse index must be finite");
  if (!(a > 0.0) || !std::isfinite(a)) {
    throw std::invalid_argument("nonlinearity factor must be finite and > 0");
  }
  params.validate();
}

}  // namespace

double weight_update_curve(double p, PulseDirection dir, const DeviceParams& params, double a) {
  check_curve_args(p, params, a);
  // B = (x_max - x_min) / (1 - exp(-p_max/a)); expm1 keeps the a >> p_max
  // (near-linear) regime exact.
  const double denom = -std::expm1(-static_cast<double>(params.p_max) / a);
  const double b = params.range() / denom;
  const double rise = b * -std::expm1(-p / a);
  const double x = dir == PulseDirection::ltp ? params.x_min + rise : params.x_max - rise;
  return std::clamp(x, params.x_min, params.x_max);
}

double invert_curve(double x, PulseDirection dir, const DeviceParams& params, double a) {
  check_curve_args(0.0, params, a);
  if (!std::isfinite(x)) throw std::domain_error("state must be finite");
  const double slack = 1e-9 * params.range();
  if (x < params.x_min - slack || x > params.x_max + slack) {
    throw std::domain_error("state outside [x_min, x_max]");
  }
  x = std::clamp(x, params.x_min, params.x_max);
  const double denom = -std::expm1(-static_cast<double>(params.p_max) / a);
  const double b = params.range() / denom;
  const double rise = dir == PulseDirection::ltp ? x - params.x_min : params.x_max - x;
  // rise = B(1 - e^(-p/a))  =>  p = -a log1p(-rise/B)
  const double frac = std::min(rise / b, 1.0);
  double p;
  if (frac >= 1.0) {
    p = static_cast<double>(params.p_max);  // only reachable when rise == range
  } else {
    p = -a * std::log1p(-frac);
  }
  return std::clamp(p, 0.0, static_cast<double>(params.p_max));
}

DeviceState apply_pulses(DeviceState state, int n, const DeviceParams& params, Rng& rng) {
  params.validate();
  if (std::abs(n) > params.p_max) {
    throw std::invalid_argument("pulse count exceeds p_max");
  }
  if (state.stuck || n == 0) return state;

  const PulseDirection dir = n > 0 ? PulseDirection::ltp : PulseDirection::ltd;
  const double a = state.a_for(params, dir == PulseDirection::ltd);
  const double p = invert_curve(state.x, dir, params, a);
  const double p_new = std::min(p + std::abs(n), static_cast<double>(params.p_max));
  double x = weight_update_curve(p_new, dir, params, a);
  if (params.sigma_c2c > 0.0) {
    // Independent per-pulse increments: variance grows with |n|.
    x += rng.normal(0.0, params.sigma_c2c * params.range() * std::sqrt(std::abs(n)));
  }
  state.x = std::clamp(x, params.x_min, params.x_max);
  return state;
}

DevicePopulation::DevicePopulation(int rows, int cols)
    : rows_(rows), cols_(cols), cells_(static_cast<std::size_t>(rows) * cols) {}

DevicePopulation sample_population(const DeviceParams& params, int rows, int cols, Rng& rng) {
  params.validate();
  if (rows < 1 || cols < 1) throw std::invalid_argument("population needs rows, cols >= 1");
  DevicePopulation pop(rows, cols);
  for (auto& cell : pop.cells()) {
    double a = params.a_ltp;
    if (params.sigma_d2d > 0.0) {
      const double sigma = params.sigma_d2d * params.a_ltp;
      a = rng.normal(params.a_ltp, sigma);
      int guard = 0;
      while (a <= 0.0 && ++guard < 64) a = rng.normal(params.a_ltp, sigma);
      if (a <= 0.0) a = 1e-3 * params.a_ltp;
    }
    cell.a = a;
    cell.stuck = rng.bernoulli(params.stuck_prob);
    cell.stuck_value = params.x_min;  // fresh array: nearest endpoint is the floor
    cell.x = cell.stuck ? cell.stuck_value : params.x_min;
  }
  return pop;
}

DeviceParams device_preset(const std::string& name) {
  DeviceParams p;
  if (name == "tiox-memristor") {
    // Endpoints from the measured on/off resistances (10 kOhm / 25 MOhm).
    p.x_min = 1.0 / 25.0e6;
    p.x_max = 1.0 / 10.0e3;
    p.kind = DeviceKind::memristor;
  } else if (name == "si-memcapacitor") {
    // Endpoints from the measured capacitance window (2 pF / 30 pF).
    p.x_min = 2.0e-12;
    p.x_max = 30.0e-12;
    p.kind = DeviceKind::memcapacitor;
  } else if (name == "ota-meminductor") {
    // Inverse-meminductance window of the emulator-backed cell; 10:1
    // programmable span.
    p.x_min = 170.0;
    p.x_max = 1700.0;
    p.kind = DeviceKind::meminductor;
  } else {
    throw std::invalid_argument("unknown device preset: " + name);
  }
  p.p_max = 31;       // 32 programmable levels
  p.a_ltp = 10.0;     // moderate update nonlinearity
  p.a_ltd = 10.0;     // same magnitude as LTP by default
  p.sigma_d2d = 0.1;  // 3sigma/mu = 30%
  p.sigma_c2c = 0.02;
  p.stuck_prob = 0.01;  // >99% operational yield
  return p;
}

std::vector<std::string> device_preset_names() {
  return {"tiox-memristor", "si-memcapacitor", "ota-meminductor"};
}

}  // namespace memsim
