#include "memsim/experiments.hpp"

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "memsim/analog_net.hpp"
#include "memsim/costmodel.hpp"
#include "memsim/crossbar.hpp"
#include "memsim/dataset.hpp"
#include "memsim/meminductor.hpp"
#include "memsim/training.hpp"

namespace memsim {

// --------------------------------------------------------------------------
// SHA-256 (FIPS 180-4), self-contained for manifest and determinism checks.
namespace {

struct Sha256 {
  std::uint32_t h[8] = {0x6a09e667, 0xbb67ae85, 0x3c6ef372, 0xa54ff53a,
                        0x510e527f, 0x9b05688c, 0x1f83d9ab, 0x5be0cd19};
  std::uint64_t length = 0;
  unsigned char buf[64];
  std::size_t fill = 0;

  static std::uint32_t rotr(std::uint32_t x, int n) { return (x >> n) | (x << (32 - n)); }

  void process(const unsigned char* p) {
    static const std::uint32_t k[64] = {
        0x428a2f98, 0x71374491, 0xb5c0fbcf, 0xe9b5dba5, 0x3956c25b, 0x59f111f1, 0x923f82a4,
        0xab1c5ed5, 0xd807aa98, 0x12835b01, 0x243185be, 0x550c7dc3, 0x72be5d74, 0x80deb1fe,
        0x9bdc06a7, 0xc19bf174, 0xe49b69c1, 0xefbe4786, 0x0fc19dc6, 0x240ca1cc, 0x2de92c6f,
        0x4a7484aa, 0x5cb0a9dc, 0x76f988da, 0x983e5152, 0xa831c66d, 0xb00327c8, 0xbf597fc7,
        0xc6e00bf3, 0xd5a79147, 0x06ca6351, 0x14292967, 0x27b70a85, 0x2e1b2138, 0x4d2c6dfc,
        0x53380d13, 0x650a7354, 0x766a0abb, 0x81c2c92e, 0x92722c85, 0xa2bfe8a1, 0xa81a664b,
        0xc24b8b70, 0xc76c51a3, 0xd192e819, 0xd6990624, 0xf40e3585, 0x106aa070, 0x19a4c116,
        0x1e376c08, 0x2748774c, 0x34b0bcb5, 0x391c0cb3, 0x4ed8aa4a, 0x5b9cca4f, 0x682e6ff3,
        0x748f82ee, 0x78a5636f, 0x84c87814, 0x8cc70208, 0x90befffa, 0xa4506ceb, 0xbef9a3f7,
        0xc67178f2};
    std::uint32_t w[64];
    for (int i = 0; i < 16; ++i) {
      w[i] = (std::uint32_t(p[4 * i]) << 24) | (std::uint32_t(p[4 * i + 1]) << 16) |
             (std::uint32_t(p[4 * i + 2]) << 8) | std::uint32_t(p[4 * i + 3]);
    }
    for (int i = 16; i < 64; ++i) {
      const std::uint32_t s0 = rotr(w[i - 15], 7) ^ rotr(w[i - 15], 18) ^ (w[i - 15] >> 3);
      const std::uint32_t s1 = rotr(w[i - 2], 17) ^ rotr(w[i - 2], 19) ^ (w[i - 2] >> 10);
      w[i] = w[i - 16] + s0 + w[i - 7] + s1;
    }
    std::uint32_t a = h[0], b = h[1], c = h[2], d = h[3], e = h[4], f = h[5], g = h[6],
                  hh = h[7];
    for (int i = 0; i < 64; ++i) {
      const std::uint32_t s1 = rotr(e, 6) ^ rotr(e, 11) ^ rotr(e, 25);
      const std::uint32_t ch = (e & f) ^ (~e & g);
      const std::uint32_t t1 = hh + s1 + ch + k[i] + w[i];
      const std::uint32_t s0 = rotr(a, 2) ^ rotr(a, 13) ^ rotr(a, 22);
      const std::uint32_t maj = (a & b) ^ (a & c) ^ (b & c);
      const std::uint32_t t2 = s0 + maj;
      hh = g;
      g = f;
      f = e;
      e = d + t1;
      d = c;
      c = b;
      b = a;
      a = t1 + t2;
    }
    h[0] += a;
    h[1] += b;
    h[2] += c;
    h[3] += d;
    h[4] += e;
    h[5] += f;
    h[6] += g;
    h[7] += hh;
  }

  void update(const unsigned char* data, std::size_t len) {
    length += len * 8;
    while (len > 0) {
      const std::size_t take = std::min(len, sizeof(buf) - fill);
      std::memcpy(buf + fill, data, take);
      fill += take;
      data += take;
      len -= take;
      if (fill == 64) {
        process(buf);
        fill = 0;
      }
    }
  }

  std::string hex() {
    const std::uint64_t bits = length;
    unsigned char pad = 0x80;
    update(&pad, 1);
    unsigned char zero = 0;
    while (fill != 56) update(&zero, 1);
    unsigned char lenb[8];
    for (int i = 0; i < 8; ++i) lenb[i] = static_cast<unsigned char>(bits >> (56 - 8 * i));
    update(lenb, 8);
    static const char* digits = "0123456789abcdef";
    std::string out;
    for (std::uint32_t v : h) {
      for (int i = 7; i >= 0; --i) out.push_back(digits[(v >> (4 * i)) & 0xf]);
    }
    return out;
  }
};

}  // namespace

std::string sha256_hex(const std::string& data) {
  Sha256 s;
  s.update(reinterpret_cast<const unsigned char*>(data.data()), data.size());
  return s.hex();
}

std::string sha256_file_hex(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for hashing: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return sha256_hex(ss.str());
}

// --------------------------------------------------------------------------

std::vector<std::string> emit_report(const CsvWriter& table, const std::string& dir,
                                     const std::string& basename, const std::string& format) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (format != "csv" && format != "text" && format != "both") {
    throw std::invalid_argument("emit_report: format must be csv, text or both");
  }
  std::vector<std::string> files;
  const std::string csv_path = (fs::path(dir) / (basename + ".csv")).string();
  table.write(csv_path);
  files.push_back(csv_path);
  if (format == "text" || format == "both") {
    const CsvTable parsed = read_csv(csv_path);
    const std::string txt_path = (fs::path(dir) / (basename + ".txt")).string();
    std::ofstream f(txt_path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + txt_path);
    f << render_text_table(parsed);
    files.push_back(txt_path);
  }
  return files;
}

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

MeminductorParams sweep_variant(const MeminductorParams& base, const std::string& param,
                                double value, HysteresisSection& drive) {
  MeminductorParams p = base;
  if (param == "freq_hz") {
    drive.freq_hz = value;
  } else if (param == "v_m") {
    drive.v_m = value;
  } else if (param == "gm_scale") {
    p.gm1 = base.gm1 * value;
    p.gm3 = base.gm3 * value;
  } else if (param == "v_t_delta") {
    p.v_t = base.v_t + value;
  } else {
    throw ConfigError("unknown sweep param: " + param);
  }
  return p;
}

void write_manifest(const ExperimentConfig& cfg, ExperimentResult& result) {
  json m;
  m["experiment"] = cfg.experiment;
  m["seed"] = cfg.seed;
  m["version"] = kVersion;
  m["config"] = json::parse(cfg.resolved_json);
  m["config_hash"] = sha256_hex(cfg.resolved_json + kVersion);
  json files = json::array();
  for (const auto& f : result.files) {
    json entry;
    entry["path"] = fs::path(f).filename().string();
    entry["sha256"] = sha256_file_hex(f);
    files.push_back(entry);
  }
  m["outputs"] = files;
  const std::string path = (fs::path(cfg.out_dir) / "manifest.json").string();
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << m.dump(2) << "\n";
  result.files.push_back(path);
}

ExperimentResult run_hysteresis(const ExperimentConfig& cfg) {
  ExperimentResult result;
  const HysteresisSection& h = cfg.hysteresis;
  const HysteresisResult r =
      hysteresis_trace(cfg.meminductor, h.v_m, h.freq_hz, h.cycles, h.steps_per_cycle);

  CsvWriter trace({"t", "v_in", "phi", "rho", "i_in", "m_inv"});
  for (std::size_t k = 0; k < r.trace.size(); ++k) {
    trace.add_row({r.trace.t[k], r.trace.v_in[k], r.trace.phi[k], r.trace.rho[k], r.trace.i_in[k],
                   r.trace.m_inv[k]});
  }
  auto files = emit_report(trace, cfg.out_dir, "trace", "csv");
  result.files.insert(result.files.end(), files.begin(), files.end());

  CsvWriter summary({"sweep_param", "lobe_area", "pinch_residual", "m_inv_amplitude"});
  summary.add_row({h.freq_hz, r.lobe_area, r.pinch_residual, r.m_inv_ptp});
  files = emit_report(summary, cfg.out_dir, "summary", "both");
  result.files.insert(result.files.end(), files.begin(), files.end());

  result.summary = "hysteresis: lobe_area=" + format_double(r.lobe_area) +
                   " pinch_residual=" + format_double(r.pinch_residual);
  return result;
}

ExperimentResult run_sweep(const ExperimentConfig& cfg) {
  if (cfg.sweep.values.empty()) {
    CsvWriter summary({"sweep_param", "lobe_area", "pinch_residual", "m_inv_amplitude"});
    ExperimentResult result;
    result.files = emit_report(summary, cfg.out_dir, "summary", "both");
    result.summary = "sweep: empty";
    return result;
  }

  struct Row {
    double value, lobe, pinch, ptp;
  };
  std::vector<Row> rows(cfg.sweep.values.size());
  std::vector<std::size_t> next(1, 0);
  std::mutex mu;
  const int hw = static_cast<int>(std::thread::hardware_concurrency());
  const int cap = cfg.threads > 0 ? cfg.threads : std::max(1, hw);
  const int workers =
      std::max(1, std::min<int>(cap, static_cast<int>(cfg.sweep.values.size())));

  auto work = [&] {
    for (;;) {
      std::size_t i;
      {
        std::lock_guard<std::mutex> lock(mu);
        if (next[0] >= cfg.sweep.values.size()) return;
        i = next[0]++;
      }
      HysteresisSection drive = cfg.sweep.base;
      const MeminductorParams p =
          sweep_variant(cfg.meminductor, cfg.sweep.param, cfg.sweep.values[i], drive);
      const HysteresisResult r =
          hysteresis_trace(p, drive.v_m, drive.freq_hz, drive.cycles, drive.steps_per_cycle);
      rows[i] = {cfg.sweep.values[i], r.lobe_area, r.pinch_residual, r.m_inv_ptp};
    }
  };
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) pool.emplace_back(work);
  for (auto& th : pool) th.join();

  CsvWriter summary({"sweep_param", "lobe_area", "pinch_residual", "m_inv_amplitude"});
  for (const Row& r : rows) summary.add_row({r.value, r.lobe, r.pinch, r.ptp});
  ExperimentResult result;
  result.files = emit_report(summary, cfg.out_dir, "summary", "both");
  result.summary = "sweep over " + cfg.sweep.param + ": " +
                   std::to_string(cfg.sweep.values.size()) + " points";
  return result;
}

ExperimentResult run_amoeba(const ExperimentConfig& cfg) {
  const AmoebaSection& a = cfg.amoeba;
  MeminductorParams p = cfg.meminductor;
  p.invert_port = true;  // positive effective inductance in the RLC loop
  p.gm3 *= a.gm3_scale;

  const std::size_t steps = static_cast<std::size_t>(a.duration_s / a.dt_s);
  std::vector<double> v(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) {
    const double t = static_cast<double>(k) * a.dt_s;
    const double phase = std::fmod(t, a.dip_period_s);
    v[k] = a.baseline_v - (phase < a.dip_width_s ? a.dip_depth_v : 0.0);
  }
  const AmoebaResult r = simulate_amoeba(p, a.r_ohm, a.c_farad, v, a.dt_s);

  CsvWriter trace({"t", "v_in", "v_out"});
  for (std::size_t k = 0; k < r.t.size(); ++k) {
    trace.add_row({r.t[k], r.v_in[k], r.v_out[k]});
  }
  ExperimentResult result;
  result.files = emit_report(trace, cfg.out_dir, "trace", "csv");
  result.summary = "amoeba: " + std::to_string(r.t.size()) + " samples";
  return result;
}

ExperimentResult run_cost(const ExperimentConfig& cfg) {
  NetworkSpec net;
  if (cfg.cost.network == "vgg8") {
    net = vgg8_network();
  } else if (cfg.cost.network == "mnist-cnn") {
    net = mnist_cnn();
  } else if (cfg.cost.network == "mnist-mlp") {
    net = mnist_mlp();
  } else {
    throw ConfigError("cost.network must be vgg8, mnist-cnn or mnist-mlp");
  }
  const ChipPlan plan = plan_tiles(net, cfg.cost.array_size);
  const TrafficStats traffic =
      traffic_from_network(net, plan, cfg.cost.samples, cfg.cost.input_bits, cfg.cost.adc_bits);
  const CostReport rep = estimate_costs(plan, net, traffic, cfg.tech);

  CsvWriter cost({"metric", "value"});
  cost.add_row({std::string("network"), cfg.cost.network});
  cost.add_row({std::string("tile_arrays"), static_cast<std::int64_t>(plan.tile_arrays)});
  cost.add_row({std::string("tiles_total"), static_cast<std::int64_t>(plan.tiles_total)});
  cost.add_row({std::string("utilization"), rep.utilization});
  cost.add_row({std::string("area_mm2"), rep.area_mm2});
  for (const auto& [k, v] : rep.area_parts.parts) cost.add_row({"area_mm2." + k, v});
  cost.add_row({std::string("latency_s"), rep.latency_s});
  cost.add_row({std::string("energy_j"), rep.energy_j});
  for (const auto& [k, v] : rep.energy_parts.parts) cost.add_row({"energy_j." + k, v});
  cost.add_row({std::string("avg_power_w"), rep.avg_power_w});
  cost.add_row({std::string("tops"), rep.tops});
  cost.add_row({std::string("tops_per_w"), rep.tops_per_w});
  ExperimentResult result;
  result.files = emit_report(cost, cfg.out_dir, "cost", "both");

  CsvWriter layers({"layer", "rows", "cols", "blocks", "tiles", "latency_s"});
  for (std::size_t i = 0; i < plan.layers.size(); ++i) {
    const LayerAssignment& la = plan.layers[i];
    layers.add_row({la.footprint.name, static_cast<std::int64_t>(la.footprint.rows),
                    static_cast<std::int64_t>(la.footprint.cols),
                    static_cast<std::int64_t>(la.footprint.blocks),
                    static_cast<std::int64_t>(la.tiles), rep.layer_latency_s[i].second});
  }
  auto files = emit_report(layers, cfg.out_dir, "plan", "both");
  result.files.insert(result.files.end(), files.begin(), files.end());
  result.summary =
      "cost: utilization=" + format_double(rep.utilization) + " tops=" + format_double(rep.tops);
  return result;
}

ExperimentResult run_vmm_bench(const ExperimentConfig& cfg) {
  Rng root(cfg.seed);
  CsvWriter out({"case", "r_line", "rel_err_parasitic", "rel_err_quantized", "rel_err_combined"});

  for (int case_id = 0; case_id < cfg.vmm.cases; ++case_id) {
    Rng case_rng = root.split(static_cast<std::uint64_t>(case_id) + 1);
    Eigen::MatrixXd w(cfg.vmm.rows, cfg.vmm.cols);
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = case_rng.uniform(-1.0, 1.0);
    }
    Eigen::VectorXd x(cfg.vmm.rows);
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = case_rng.uniform(-1.0, 1.0);
    const Eigen::VectorXd y_ref = w.transpose() * x;
    const double y_norm = std::max(y_ref.norm(), 1e-12);

    for (double r_line : cfg.vmm.r_line_values) {
      DeviceParams dev = cfg.device;
      dev.sigma_c2c = 0.0;
      dev.sigma_d2d = 0.0;
      dev.stuck_prob = 0.0;
      CrossbarConfig xc;
      xc.r_line = r_line;
      WeightMapping mapping{-1.0, 1.0, dev.x_max, dev.x_min};
      Rng map_rng = case_rng.split(static_cast<std::uint64_t>(r_line * 1e6) + 17);
      const CrossbarArray arr = map_weights(w, mapping, dev, xc, map_rng);

      // Parasitic-only error against the programmed (quantized) weights.
      const Eigen::MatrixXd w_eff = read_effective_weights(arr);
      const Eigen::VectorXd y_quant = w_eff.transpose() * x;
      Eigen::VectorXd y_par;
      if (r_line > 0.0) {
        y_par = parasitic_vmm(arr, x) / mapping.state_scale();
      } else {
        y_par = y_quant;
      }
      out.add_row({static_cast<std::int64_t>(case_id), r_line,
                   (y_par - y_quant).norm() / y_norm, (y_quant - y_ref).norm() / y_norm,
                   (y_par - y_ref).norm() / y_norm});
    }
  }
  ExperimentResult result;
  result.files = emit_report(out, cfg.out_dir, "vmm", "both");
  result.summary = "vmm-bench: " + std::to_string(cfg.vmm.cases) + " cases";
  return result;
}

ExperimentResult run_train(const ExperimentConfig& cfg) {
  NetworkSpec net;
  if (cfg.training.network == "mnist-cnn") {
    net = mnist_cnn();
  } else if (cfg.training.network == "mnist-mlp") {
    net = mnist_mlp(cfg.training.hidden);
  } else {
    if (!cfg.long_run) {
      throw ConfigError("training.network=vgg8 requires --long-run");
    }
    net = vgg8_network();
  }
  if (cfg.training.dataset_dir.empty()) {
    throw std::runtime_error("training.dataset_dir is required for the train experiment");
  }
  const fs::path dir(cfg.training.dataset_dir);
  const Dataset train_set = load_idx_dataset((dir / cfg.training.train_images).string(),
                                             (dir / cfg.training.train_labels).string());
  const Dataset test_set = load_idx_dataset((dir / cfg.training.test_images).string(),
                                            (dir / cfg.training.test_labels).string());
  if (net.input.h != train_set.height || net.input.w != train_set.width ||
      net.input.c != train_set.channels) {
    throw std::runtime_error("dataset shape does not match the network input");
  }

  TrainConfig tc = cfg.training.train;
  tc.seed = cfg.seed;

  ExperimentResult result;
  if (cfg.training.dump_calibration) {
    // Partial-sum samples per layer from a freshly programmed network, the
    // same distribution the ADC calibration sees. The pre-pass runs with a
    // pass-through ADC so the samples are the untruncated analog values.
    Rng rng(tc.seed);
    Rng init_rng = rng.split(1);
    AnalogConfig acfg = tc.analog;
    acfg.mode = AnalogPathMode::nonideal;
    acfg.quant.adc_mode = AdcMode::exact;
    AnalogNetwork an(net, acfg, init_rng);
    const int n = std::min(train_set.count, tc.batch * 4);
    Eigen::MatrixXd batch(n, train_set.pixels_per_image());
    for (int i = 0; i < n; ++i) {
      const float* img = train_set.image(i);
      for (int p = 0; p < batch.cols(); ++p) batch(i, p) = img[p];
    }
    ForwardCache cache;
    an.forward(batch, &cache);
    CsvWriter calib({"layer", "partial_sum"});
    for (std::size_t li = 0; li < an.layers().size(); ++li) {
      std::vector<double> samples;
      an.layers()[li].collect_calibration_samples(cache.layers[li].x_col, samples);
      const std::size_t cap = std::min<std::size_t>(samples.size(), 20000);
      for (std::size_t k = 0; k < cap; ++k) {
        calib.add_row({an.layers()[li].name(), samples[k]});
      }
    }
    auto files = emit_report(calib, cfg.out_dir, "calibration", "csv");
    result.files.insert(result.files.end(), files.begin(), files.end());
  }

  const TrainResult r = run_training(net, train_set, test_set, tc);

  CsvWriter metrics({"epoch", "loss", "train_acc", "val_acc", "test_acc", "wall_time"});
  for (const auto& m : r.history) {
    metrics.add_row({static_cast<std::int64_t>(m.epoch), m.loss, m.train_acc, m.val_acc,
                     m.test_acc, m.wall_s});
  }
  auto files0 = emit_report(metrics, cfg.out_dir, "metrics", "csv");
  result.files.insert(result.files.end(), files0.begin(), files0.end());

  CsvWriter summary({"best_val_epoch", "test_acc_at_best", "final_test_acc"});
  summary.add_row({static_cast<std::int64_t>(r.best_val_epoch), r.test_acc_at_best,
                   r.final_test_acc});
  auto files = emit_report(summary, cfg.out_dir, "summary", "both");
  result.files.insert(result.files.end(), files.begin(), files.end());
  result.summary = "train: test_acc_at_best=" + format_double(r.test_acc_at_best);
  return result;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  if (!fs::exists(cfg.out_dir)) {
    throw std::runtime_error("cannot create output directory: " + cfg.out_dir);
  }

  ExperimentResult result;
  if (cfg.experiment == "hysteresis") {
    result = run_hysteresis(cfg);
  } else if (cfg.experiment == "sweep") {
    result = run_sweep(cfg);
  } else if (cfg.experiment == "amoeba") {
    result = run_amoeba(cfg);
  } else if (cfg.experiment == "cost") {
    result = run_cost(cfg);
  } else if (cfg.experiment == "vmm-bench") {
    result = run_vmm_bench(cfg);
  } else if (cfg.experiment == "train") {
    result = run_train(cfg);
  } else {
    throw ConfigError("unknown experiment kind: " + cfg.experiment);
  }
  write_manifest(cfg, result);
  return result;
}

}  // namespace memsim
