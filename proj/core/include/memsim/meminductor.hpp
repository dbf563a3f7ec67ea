#pragma once

#include <Eigen/Core>
#include <functional>
#include <string>
#include <vector>

#include "memsim/crossbar.hpp"

namespace memsim {

struct OtaParams {
  double k = 0.0;     // MOS device parameter mu_n Cox W/L (A/V^2)
  double v_b = 0.0;   // bias voltage (V)
  double v_ss = 0.0;  // negative supply (V)
  double v_t = 0.0;   // threshold voltage (V)
};

// gm = (K / sqrt(2)) * (V_b - V_ss - 2 V_t). May come out negative when the
// bias sits below cutoff; callers decide how to treat that.
double ota_gm(const OtaParams& p);

enum class MeminductorMode { decremental, incremental };

struct MeminductorParams {
  double k = 0.0;    // OTA K (A/V^2)
  double gm1 = 0.0;  // S
  double gm3 = 0.0;  // S
  double c1 = 0.0;   // F
  double c2 = 0.0;   // F
  double v_ss = 0.0;
  double v_t = 0.0;
  MeminductorMode mode = MeminductorMode::decremental;
  // Port polarity flag. With V_ss + V_t < 0 the literal equations give a
  // negative baseline inverse meminductance; swapping the port terminals
  // flips the sign without touching the equations.
  bool invert_port = false;

  void validate() const;

  // Baseline term K*gm1*(V_ss+V_t)/C1 (port polarity applied).
  double base_inverse_meminductance() const;
  // Coefficient of rho in the inverse meminductance, sign per mode.
  double rho_coefficient() const;
  // lambda = 2 pi C1 C2 / (K gm1 gm3 V_m).
  double time_constant(double v_m) const;
  // Closed-form modulation of the inverse meminductance under a sinusoidal
  // drive: K gm1 gm3 V_m / (omega C1 C2) = 1/(lambda f).
  double m_inv_modulation(double v_m, double freq_hz) const;
};

struct MeminductorState {
  double phi = 0.0;  // flux, integral of v_in (V s)
  double rho = 0.0;  // integral of phi (V s^2)
  double t = 0.0;    // time (s)
};

// Inverse meminductance at a given rho.
double inverse_meminductance(const MeminductorParams& p, double rho);
// Port current at a given (phi, rho): i = m_inv(rho) * phi.
double input_current(const MeminductorParams& p, double phi, double rho);

struct StepResult {
  MeminductorState state;
  double i_in = 0.0;
  double m_inv = 0.0;
};

// Advance the state by dt under a drive voltage. The scalar overload holds
// v_in constant over the step; the callable overload samples v(t) at the
// RK4 stages.
StepResult step(const MeminductorState& state, double v_in, double dt,
                const MeminductorParams& p);
StepResult step(const MeminductorState& state, const std::function<double(double)>& v_of_t,
                double dt, const MeminductorParams& p);

struct Trace {
  std::vector<double> t, v_in, phi, rho, i_in, m_inv;

  std::size_t size() const { return t.size(); }
};

struct HysteresisResult {
  Trace trace;             // final cycle, flux detrended to zero mean
  double lobe_area = 0.0;  // shoelace area of one lobe of the (phi, i) orbit
  double pinch_residual = 0.0;   // |i| at the flux zero crossing / max |i|
  double m_inv_ptp = 0.0;        // peak-to-peak modulation of m_inv
  double phi_amplitude = 0.0;
  double i_amplitude = 0.0;
};

// Sinusoidal steady-state fingerprint run: v = v_m sin(2 pi f t), started on
// the periodic orbit, transients discarded, last cycle analyzed.
HysteresisResult hysteresis_trace(const MeminductorParams& p, double v_m, double freq_hz,
                                  int cycles, int steps_per_cycle);

enum class Topology { series, parallel };

struct CompositionResult {
  Trace trace;  // (phi_total, i) of the composite over the final cycle
  double lobe_area = 0.0;
};

// Drive a bank of emulators with a shared sinusoid. Parallel elements share
// the flux and sum currents; series elements share the current through a
// per-step flux split solved by bisection.
CompositionResult compose(const std::vector<MeminductorParams>& elements, Topology topology,
                          double v_m, double freq_hz, int cycles, int steps_per_cycle);

struct AmoebaResult {
  std::vector<double> t, v_in, v_out;
  double dt = 0.0;
};

// Series R - meminductor - C loop; v_out is the capacitor voltage. The
// temperature stimulus arrives as a sampled waveform at the integration
// step.
AmoebaResult simulate_amoeba(const MeminductorParams& p, double r_ohm, double c_farad,
                             const std::vector<double>& v_in_samples, double dt);

// Weight-mapped meminductive VMM read: weights map onto per-cell inverse
// meminductance via the linear mapping, each input applies a read flux
// v_i * read_pulse_s, and the column currents develop the output across the
// sense resistor: Y_j = R * I_j.
Eigen::VectorXd meminductor_vmm_forward(const Eigen::MatrixXd& weights, const Eigen::VectorXd& v_in,
                                        double r_sense, const WeightMapping& mapping,
                                        double read_pulse_s = 1e-6);

// Named emulator parameter sets. "sim-3mhz" is tuned so the optimum-lobe
// condition lambda = 1/f holds at 3 MHz with a 0.5 V drive;
// "ca3080-breadboard" carries the bench component values.
MeminductorParams meminductor_preset(const std::string& name);
std::vector<std::string> meminductor_preset_names();

}  // namespace memsim
