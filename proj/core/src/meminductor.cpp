#include "memsim/meminductor.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace memsim {

namespace {
constexpr double kPi = std::numbers::pi;
}

double ota_gm(const OtaParams& p) {
  if (!std::isfinite(p.k) || !std::isfinite(p.v_b) || !std::isfinite(p.v_ss) ||
      !std::isfinite(p.v_t)) {
    throw std::invalid_argument("ota_gm: parameters must be finite");
  }
  return p.k / std::sqrt(2.0) * (p.v_b - p.v_ss - 2.0 * p.v_t);
}

void MeminductorParams::validate() const {
  if (!(c1 > 0.0) || !(c2 > 0.0)) throw std::invalid_argument("meminductor: c1, c2 > 0");
  if (!(gm1 > 0.0)) throw std::invalid_argument("meminductor: gm1 > 0");
  // gm3 == 0 freezes the meminductance (used by the linear-RLC oracle).
  if (gm3 < 0.0) throw std::invalid_argument("meminductor: gm3 >= 0");
  if (!(k > 0.0)) throw std::invalid_argument("meminductor: k > 0");
}

double MeminductorParams::base_inverse_meminductance() const {
  const double sign = invert_port ? -1.0 : 1.0;
  return sign * k * gm1 * (v_ss + v_t) / c1;
}

double MeminductorParams::rho_coefficient() const {
  const double sign = invert_port ? -1.0 : 1.0;
  const double mode_sign = mode == MeminductorMode::decremental ? -1.0 : 1.0;
  return sign * mode_sign * k * gm1 * gm1 * gm3 / (c1 * c1 * c2);
}

double MeminductorParams::time_constant(double v_m) const {
  return 2.0 * kPi * c1 * c2 / (k * gm1 * gm3 * v_m);
}

double MeminductorParams::m_inv_modulation(double v_m, double freq_hz) const {
  const double omega = 2.0 * kPi * freq_hz;
  return k * gm1 * gm3 * v_m / (omega * c1 * c2);
}

double inverse_meminductance(const MeminductorParams& p, double rho) {
  return p.base_inverse_meminductance() + p.rho_coefficient() * rho;
}

double input_current(const MeminductorParams& p, double phi, double rho) {
  return inverse_meminductance(p, rho) * phi;
}

namespace {

// One RK4 step of (phi' = v, rho' = phi) with the drive sampled at the
// stage times.
MeminductorState rk4_flux_step(const MeminductorState& s, double v0, double vh, double v1,
                               double dt) {
  const double k1_phi = v0;
  const double k1_rho = s.phi;
  const double k2_phi = vh;
  const double k2_rho = s.phi + 0.5 * dt * k1_phi;
  const double k3_phi = vh;
  const double k3_rho = s.phi + 0.5 * dt * k2_phi;
  const double k4_phi = v1;
  const double k4_rho = s.phi + dt * k3_phi;
  MeminductorState out;
  out.phi = s.phi + dt / 6.0 * (k1_phi + 2.0 * k2_phi + 2.0 * k3_phi + k4_phi);
  out.rho = s.rho + dt / 6.0 * (k1_rho + 2.0 * k2_rho + 2.0 * k3_rho + k4_rho);
  out.t = s.t + dt;
  return out;
}

}  // namespace

StepResult step(const MeminductorState& state, double v_in, double dt,
                const MeminductorParams& p) {
  if (!(dt > 0.0)) throw std::invalid_argument("step: dt > 0 required");
  p.validate();
  StepResult r;
  r.state = rk4_flux_step(state, v_in, v_in, v_in, dt);
  r.m_inv = inverse_meminductance(p, r.state.rho);
  r.i_in = r.m_inv * r.state.phi;
  return r;
}

StepResult step(const MeminductorState& state, const std::function<double(double)>& v_of_t,
                double dt, const MeminductorParams& p) {
  if (!(dt > 0.0)) throw std::invalid_argument("step: dt > 0 required");
  p.validate();
  StepResult r;
  r.state = rk4_flux_step(state, v_of_t(state.t), v_of_t(state.t + 0.5 * dt),
                          v_of_t(state.t + dt), dt);
  r.m_inv = inverse_meminductance(p, r.state.rho);
  r.i_in = r.m_inv * r.state.phi;
  return r;
}

namespace {

struct LobeGeometry {
  double lobe_area = 0.0;
  double pinch_residual_abs = 0.0;  // max |i| at a flux zero crossing
};

double shoelace(const std::vector<double>& x, const std::vector<double>& y) {
  double a = 0.0;
  const std::size_t n = x.size();
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t k1 = (k + 1) % n;
    a += x[k] * y[k1] - x[k1] * y[k];
  }
  return 0.5 * a;
}

// Splits one periodic (phi, i) cycle at the flux zero crossings and returns
// the mean unsigned shoelace area of the resulting lobes.
LobeGeometry analyze_lobes(const std::vector<double>& phi, const std::vector<double>& i) {
  const std::size_t m = phi.size();
  LobeGeometry out;

  struct Crossing {
    std::size_t after;  // crossing lies between sample `after` and `after+1 mod m`
    double i_at;
  };
  std::vector<Crossing> crossings;
  for (std::size_t k = 0; k < m; ++k) {
    const std::size_t k1 = (k + 1) % m;
    if (phi[k] == 0.0 || phi[k] * phi[k1] < 0.0) {
      const double denom = phi[k1] - phi[k];
      const double frac = denom != 0.0 ? -phi[k] / denom : 0.0;
      crossings.push_back({k, i[k] + frac * (i[k1] - i[k])});
    }
  }
  for (const auto& c : crossings) {
    out.pinch_residual_abs = std::max(out.pinch_residual_abs, std::abs(c.i_at));
  }

  if (crossings.size() < 2) {
    // No pinch: a single closed loop.
    out.lobe_area = std::abs(shoelace(phi, i));
    return out;
  }

  // Use the first two crossings to cut the cycle into two circular arcs.
  const Crossing& ca = crossings[0];
  const Crossing& cb = crossings[1];
  auto arc_area = [&](const Crossing& from, const Crossing& to) {
    std::vector<double> x{0.0}, y{from.i_at};
    for (std::size_t k = (from.after + 1) % m; k != (to.after + 1) % m; k = (k + 1) % m) {
      x.push_back(phi[k]);
      y.push_back(i[k]);
    }
    x.push_back(0.0);
    y.push_back(to.i_at);
    return std::abs(shoelace(x, y));
  };
  out.lobe_area = 0.5 * (arc_area(ca, cb) + arc_area(cb, ca));
  return out;
}

void detrend_last_cycle(Trace& cycle, const MeminductorParams& p) {
  const std::size_t m = cycle.size();
  if (m == 0) return;
  double phi_mean = 0.0, rho_mean = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    phi_mean += cycle.phi[k];
    rho_mean += cycle.rho[k];
  }
  phi_mean /= static_cast<double>(m);
  rho_mean /= static_cast<double>(m);
  for (std::size_t k = 0; k < m; ++k) {
    cycle.phi[k] -= phi_mean;
    cycle.rho[k] -= rho_mean;
    cycle.m_inv[k] = inverse_meminductance(p, cycle.rho[k]);
    cycle.i_in[k] = cycle.m_inv[k] * cycle.phi[k];
  }
}

}  // namespace

HysteresisResult hysteresis_trace(const MeminductorParams& p, double v_m, double freq_hz,
                                  int cycles, int steps_per_cycle) {
  p.validate();
  if (cycles < 4) throw std::invalid_argument("hysteresis_trace: cycles >= 4 required");
  if (steps_per_cycle < 1000) {
    throw std::invalid_argument("hysteresis_trace: steps_per_cycle >= 1000 required");
  }
  if (!(v_m > 0.0) || !(freq_hz > 0.0)) {
    throw std::invalid_argument("hysteresis_trace: v_m, freq_hz > 0 required");
  }

  const double omega = 2.0 * kPi * freq_hz;
  const double dt = 1.0 / freq_hz / steps_per_cycle;
  auto drive = [&](double t) { return v_m * std::sin(omega * t); };

  // Start on the periodic orbit: phi(t) = -(v_m/omega) cos(omega t), rho
  // zero-mean; transients then stay negligible and the steady-state check
  // below guards the claim.
  MeminductorState s;
  s.phi = -v_m / omega;
  s.rho = 0.0;

  const int total = cycles * steps_per_cycle;
  Trace full;
  full.t.reserve(total + 1);
  auto record = [&](const MeminductorState& st) {
    full.t.push_back(st.t);
    full.v_in.push_back(drive(st.t));
    full.phi.push_back(st.phi);
    full.rho.push_back(st.rho);
    const double m_inv = inverse_meminductance(p, st.rho);
    full.m_inv.push_back(m_inv);
    full.i_in.push_back(m_inv * st.phi);
  };
  record(s);
  for (int k = 0; k < total; ++k) {
    s = rk4_flux_step(s, drive(s.t), drive(s.t + 0.5 * dt), drive(s.t + dt), dt);
    record(s);
  }

  auto cycle_slice = [&](int cycle_from_end) {
    Trace c;
    const std::size_t last = full.size() - 1;
    const std::size_t hi = last - static_cast<std::size_t>(cycle_from_end) * steps_per_cycle;
    const std::size_t lo = hi - steps_per_cycle;
    for (std::size_t k = lo; k < hi; ++k) {  // half-open: one full period
      c.t.push_back(full.t[k]);
      c.v_in.push_back(full.v_in[k]);
      c.phi.push_back(full.phi[k]);
      c.rho.push_back(full.rho[k]);
      c.i_in.push_back(full.i_in[k]);
      c.m_inv.push_back(full.m_inv[k]);
    }
    detrend_last_cycle(c, p);
    return c;
  };

  Trace last = cycle_slice(0);
  Trace prev = cycle_slice(1);
  const LobeGeometry geom_last = analyze_lobes(last.phi, last.i_in);
  const LobeGeometry geom_prev = analyze_lobes(prev.phi, prev.i_in);
  if (geom_prev.lobe_area > 0.0) {
    const double rel = std::abs(geom_last.lobe_area - geom_prev.lobe_area) / geom_prev.lobe_area;
    if (rel > 0.01) {
      throw std::runtime_error("hysteresis_trace: orbit not steady (lobe area drifts > 1%)");
    }
  }

  HysteresisResult r;
  r.trace = std::move(last);
  r.lobe_area = geom_last.lobe_area;
  double i_max = 0.0, phi_max = 0.0, m_lo = r.trace.m_inv[0], m_hi = r.trace.m_inv[0];
  for (std::size_t k = 0; k < r.trace.size(); ++k) {
    i_max = std::max(i_max, std::abs(r.trace.i_in[k]));
    phi_max = std::max(phi_max, std::abs(r.trace.phi[k]));
    m_lo = std::min(m_lo, r.trace.m_inv[k]);
    m_hi = std::max(m_hi, r.trace.m_inv[k]);
  }
  r.i_amplitude = i_max;
  r.phi_amplitude = phi_max;
  r.m_inv_ptp = m_hi - m_lo;
  r.pinch_residual = i_max > 0.0 ? geom_last.pinch_residual_abs / i_max : 0.0;
  return r;
}

CompositionResult compose(const std::vector<MeminductorParams>& elements, Topology topology,
                          double v_m, double freq_hz, int cycles, int steps_per_cycle) {
  if (elements.empty()) throw std::invalid_argument("compose: need at least one element");
  for (const auto& e : elements) e.validate();
  if (cycles < 4 || steps_per_cycle < 1000) {
    throw std::invalid_argument("compose: cycles >= 4 and steps_per_cycle >= 1000 required");
  }

  const double omega = 2.0 * kPi * freq_hz;
  const double dt = 1.0 / freq_hz / steps_per_cycle;
  auto drive = [&](double t) { return v_m * std::sin(omega * t); };
  const int total = cycles * steps_per_cycle;

  Trace full;
  const std::size_t n = elements.size();

  if (topology == Topology::parallel) {
    // Shared drive means shared (phi, rho); currents add.
    MeminductorState s;
    s.phi = -v_m / omega;
    auto record = [&](const MeminductorState& st) {
      double i = 0.0;
      for (const auto& e : elements) i += input_current(e, st.phi, st.rho);
      full.t.push_back(st.t);
      full.v_in.push_back(drive(st.t));
      full.phi.push_back(st.phi);
      full.rho.push_back(st.rho);
      full.i_in.push_back(i);
      full.m_inv.push_back(st.phi != 0.0 ? i / st.phi : 0.0);
    };
    record(s);
    for (int k = 0; k < total; ++k) {
      s = rk4_flux_step(s, drive(s.t), drive(s.t + 0.5 * dt), drive(s.t + dt), dt);
      record(s);
    }
  } else {
    // Series: the drive fixes the total flux; at every step the flux split
    // must equalize the element currents. The residual is evaluated through
    // the current law and solved by bisection on the shared current.
    MeminductorState tot;
    tot.phi = -v_m / omega;
    std::vector<double> rho(n, 0.0);
    std::vector<double> phi_prev(n, tot.phi / static_cast<double>(n));

    auto solve_shared_current = [&](double phi_total) {
      std::vector<double> m_inv(n);
      double inv_sum = 0.0;
      for (std::size_t e = 0; e < n; ++e) {
        m_inv[e] = inverse_meminductance(elements[e], rho[e]);
        if (m_inv[e] == 0.0) throw std::runtime_error("compose: element meminductance diverged");
        inv_sum += 1.0 / m_inv[e];
      }
      const double i_star = phi_total / inv_sum;  // linear estimate brackets the root
      double lo = 0.0, hi = 2.0 * i_star;
      if (hi < lo) std::swap(lo, hi);
      auto residual = [&](double i) {
        double acc = 0.0;
        for (std::size_t e = 0; e < n; ++e) acc += i / m_inv[e];
        return acc - phi_total;
      };
      double r_lo = residual(lo);
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double r_mid = residual(mid);
        if ((r_lo <= 0.0) == (r_mid <= 0.0)) {
          lo = mid;
          r_lo = r_mid;
        } else {
          hi = mid;
        }
        if (std::abs(hi - lo) <= 1e-12 * std::max(1.0, std::abs(mid))) break;
      }
      const double i = 0.5 * (lo + hi);
      std::vector<double> phi(n);
      for (std::size_t e = 0; e < n; ++e) phi[e] = i / m_inv[e];
      return std::pair<double, std::vector<double>>(i, std::move(phi));
    };

    auto record = [&](double t, double phi_total, double i) {
      full.t.push_back(t);
      full.v_in.push_back(drive(t));
      full.phi.push_back(phi_total);
      full.rho.push_back(0.0);
      full.i_in.push_back(i);
      full.m_inv.push_back(phi_total != 0.0 ? i / phi_total : 0.0);
    };

    {
      auto [i0, phi0] = solve_shared_current(tot.phi);
      phi_prev = phi0;
      record(tot.t, tot.phi, i0);
    }
    for (int k = 0; k < total; ++k) {
      tot = rk4_flux_step(tot, drive(tot.t), drive(tot.t + 0.5 * dt), drive(tot.t + dt), dt);
      auto [i, phi_split] = solve_shared_current(tot.phi);
      for (std::size_t e = 0; e < n; ++e) {
        rho[e] += 0.5 * dt * (phi_prev[e] + phi_split[e]);  // trapezoidal rho update
      }
      phi_prev = phi_split;
      record(tot.t, tot.phi, i);
    }
  }

  // Final cycle, flux detrended, currents kept as computed.
  CompositionResult out;
  const std::size_t last = full.size() - 1;
  const std::size_t lo = last - static_cast<std::size_t>(steps_per_cycle);
  double phi_mean = 0.0;
  for (std::size_t k = lo; k < last; ++k) phi_mean += full.phi[k];
  phi_mean /= static_cast<double>(steps_per_cycle);
  for (std::size_t k = lo; k < last; ++k) {
    out.trace.t.push_back(full.t[k]);
    out.trace.v_in.push_back(full.v_in[k]);
    out.trace.phi.push_back(full.phi[k] - phi_mean);
    out.trace.rho.push_back(full.rho[k]);
    out.trace.i_in.push_back(full.i_in[k]);
    out.trace.m_inv.push_back(full.m_inv[k]);
  }
  out.lobe_area = analyze_lobes(out.trace.phi, out.trace.i_in).lobe_area;
  return out;
}

AmoebaResult simulate_amoeba(const MeminductorParams& p, double r_ohm, double c_farad,
                             const std::vector<double>& v_in_samples, double dt) {
  p.validate();
  if (!(dt > 0.0)) throw std::invalid_argument("simulate_amoeba: dt > 0 required");
  if (!(r_ohm >= 0.0) || !(c_farad > 0.0)) {
    throw std::invalid_argument("simulate_amoeba: need r >= 0 and c > 0");
  }
  if (v_in_samples.size() < 2) {
    throw std::invalid_argument("simulate_amoeba: waveform must be sampled at the step");
  }

  // Loop states: meminductor flux/rho and capacitor voltage.
  struct S {
    double phi, rho, vc;
  };
  auto v_at = [&](double t) {
    const double idx = t / dt;
    const std::size_t k = std::min(static_cast<std::size_t>(idx), v_in_samples.size() - 2);
    const double frac = std::clamp(idx - static_cast<double>(k), 0.0, 1.0);
    return v_in_samples[k] + frac * (v_in_samples[k + 1] - v_in_samples[k]);
  };
  auto deriv = [&](const S& s, double v) {
    const double i = inverse_meminductance(p, s.rho) * s.phi;
    const double v_l = v - r_ohm * i - s.vc;
    return S{v_l, s.phi, i / c_farad};
  };

  AmoebaResult out;
  out.dt = dt;
  S s{0.0, 0.0, 0.0};
  const std::size_t steps = v_in_samples.size() - 1;
  out.t.reserve(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) {
    const double t = static_cast<double>(k) * dt;
    out.t.push_back(t);
    out.v_in.push_back(v_in_samples[k]);
    out.v_out.push_back(s.vc);
    if (k == steps) break;

    const double v0 = v_at(t), vh = v_at(t + 0.5 * dt), v1 = v_at(t + dt);
    const S k1 = deriv(s, v0);
    const S k2 = deriv({s.phi + 0.5 * dt * k1.phi, s.rho + 0.5 * dt * k1.rho,
                        s.vc + 0.5 * dt * k1.vc},
                       vh);
    const S k3 = deriv({s.phi + 0.5 * dt * k2.phi, s.rho + 0.5 * dt * k2.rho,
                        s.vc + 0.5 * dt * k2.vc},
                       vh);
    const S k4 = deriv({s.phi + dt * k3.phi, s.rho + dt * k3.rho, s.vc + dt * k3.vc}, v1);
    s.phi += dt / 6.0 * (k1.phi + 2.0 * k2.phi + 2.0 * k3.phi + k4.phi);
    s.rho += dt / 6.0 * (k1.rho + 2.0 * k2.rho + 2.0 * k3.rho + k4.rho);
    s.vc += dt / 6.0 * (k1.vc + 2.0 * k2.vc + 2.0 * k3.vc + k4.vc);
    if (!std::isfinite(s.phi) || !std::isfinite(s.vc) || std::abs(s.vc) > 1e9) {
      throw std::runtime_error("simulate_amoeba: integration unstable; reduce dt");
    }
  }
  return out;
}

Eigen::VectorXd meminductor_vmm_forward(const Eigen::MatrixXd& weights, const Eigen::VectorXd& v_in,
                                        double r_sense, const WeightMapping& mapping,
                                        double read_pulse_s) {
  mapping.validate();
  if (v_in.size() != weights.rows()) {
    throw std::invalid_argument("meminductor_vmm_forward: dimension mismatch");
  }
  if (!(r_sense > 0.0) || !(read_pulse_s > 0.0)) {
    throw std::invalid_argument("meminductor_vmm_forward: r_sense, read_pulse_s > 0");
  }
  Eigen::MatrixXd s(weights.rows(), weights.cols());
  for (Eigen::Index i = 0; i < weights.rows(); ++i) {
    for (Eigen::Index j = 0; j < weights.cols(); ++j) {
      if (!(weights(i, j) >= mapping.w_min && weights(i, j) <= mapping.w_max)) {
        throw std::domain_error("meminductor_vmm_forward: weight outside mapping range");
      }
      s(i, j) = target_state(weights(i, j), mapping);
    }
  }
  // Read flux per row drives i = m_inv * phi per cell; columns sum.
  const Eigen::VectorXd flux = v_in * read_pulse_s;
  return r_sense * (s.transpose() * flux);
}

MeminductorParams meminductor_preset(const std::string& name) {
  MeminductorParams p;
  if (name == "sim-3mhz") {
    // Tuned so that, at f = 3 MHz with a 0.5 V drive, lambda = 1/f and the
    // simulated m_inv swing equals the closed-form modulation.
    const double f = 3.0e6;
    const double v_m = 0.5;
    p.c1 = 100e-12;
    p.gm1 = kPi * f * p.c1;
    p.gm3 = 967e-6;
    p.k = 2.0e-7;
    p.v_ss = -0.9;
    p.v_t = 0.45;
    p.c2 = p.k * p.gm1 * p.gm3 * v_m / (2.0 * kPi * f * p.c1);
    p.mode = MeminductorMode::decremental;
  } else if (name == "ca3080-breadboard") {
    // Bench build: CA3080 OTAs, C1 = 1 pF, C2 = 300 pF, +/-15 V rails.
    p.c1 = 1e-12;
    p.c2 = 300e-12;
    p.gm1 = 9.6e-3;
    p.gm3 = 9.6e-3;
    p.k = 4.02e-4;
    p.v_ss = -15.0;
    p.v_t = 0.7;
    p.mode = MeminductorMode::decremental;
  } else {
    throw std::invalid_argument("unknown meminductor preset: " + name);
  }
  return p;
}

std::vector<std::string> meminductor_preset_names() {
  return {"sim-3mhz", "ca3080-breadboard"};
}

}  // namespace memsim
