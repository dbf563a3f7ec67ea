#include "memsim/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace memsim {

namespace {

using nlohmann::json;

void require_keys(const json& obj, const std::string& section,
                  const std::set<std::string>& known) {
  if (!obj.is_object()) throw ConfigError("config section '" + section + "' must be an object");
  std::vector<std::string> unknown;
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!known.count(it.key())) unknown.push_back(section + "." + it.key());
  }
  if (!unknown.empty()) {
    std::string msg = "unknown config keys:";
    for (const auto& k : unknown) msg += " " + k;
    throw ConfigError(msg);
  }
}

template <typename T>
T get_or(const json& obj, const std::string& key, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("config key '" + key + "': " + e.what());
  }
}

DeviceParams parse_device(const json& j) {
  require_keys(j, "device",
               {"preset", "x_min", "x_max", "p_max", "a_ltp", "a_ltd", "sigma_d2d", "sigma_c2c",
                "stuck_prob", "kind"});
  DeviceParams p = device_preset(get_or<std::string>(j, "preset", "tiox-memristor"));
  p.x_min = get_or(j, "x_min", p.x_min);
  p.x_max = get_or(j, "x_max", p.x_max);
  p.p_max = get_or(j, "p_max", p.p_max);
  p.a_ltp = get_or(j, "a_ltp", p.a_ltp);
  p.a_ltd = get_or(j, "a_ltd", j.contains("a_ltp") ? p.a_ltp : p.a_ltd);
  p.sigma_d2d = get_or(j, "sigma_d2d", p.sigma_d2d);
  p.sigma_c2c = get_or(j, "sigma_c2c", p.sigma_c2c);
  p.stuck_prob = get_or(j, "stuck_prob", p.stuck_prob);
  if (j.contains("kind")) p.kind = device_kind_from_string(j.at("kind").get<std::string>());
  try {
    p.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("device: ") + e.what());
  }
  return p;
}

MeminductorParams parse_meminductor(const json& j) {
  require_keys(j, "meminductor",
               {"preset", "k", "gm1", "gm3", "c1", "c2", "v_ss", "v_t", "mode", "invert_port"});
  MeminductorParams p = meminductor_preset(get_or<std::string>(j, "preset", "sim-3mhz"));
  p.k = get_or(j, "k", p.k);
  p.gm1 = get_or(j, "gm1", p.gm1);
  p.gm3 = get_or(j, "gm3", p.gm3);
  p.c1 = get_or(j, "c1", p.c1);
  p.c2 = get_or(j, "c2", p.c2);
  p.v_ss = get_or(j, "v_ss", p.v_ss);
  p.v_t = get_or(j, "v_t", p.v_t);
  p.invert_port = get_or(j, "invert_port", p.invert_port);
  if (j.contains("mode")) {
    const std::string m = j.at("mode").get<std::string>();
    if (m == "decremental") {
      p.mode = MeminductorMode::decremental;
    } else if (m == "incremental") {
      p.mode = MeminductorMode::incremental;
    } else {
      throw ConfigError("meminductor.mode must be decremental or incremental");
    }
  }
  try {
    p.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("meminductor: ") + e.what());
  }
  return p;
}

CrossbarConfig parse_crossbar(const json& j) {
  require_keys(j, "crossbar", {"r_line", "v_read", "one_t_one_r", "memcap_attenuation"});
  CrossbarConfig c;
  c.r_line = get_or(j, "r_line", c.r_line);
  c.v_read = get_or(j, "v_read", c.v_read);
  c.one_t_one_r = get_or(j, "one_t_one_r", c.one_t_one_r);
  c.memcap_attenuation = get_or(j, "memcap_attenuation", c.memcap_attenuation);
  try {
    c.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("crossbar: ") + e.what());
  }
  return c;
}

QuantizerSettings parse_quantizer(const json& j) {
  require_keys(j, "quantizer", {"input_bits", "adc_bits", "adc_mode", "per_chip"});
  QuantizerSettings q;
  q.input_bits = get_or(j, "input_bits", q.input_bits);
  q.adc_bits = get_or(j, "adc_bits", q.adc_bits);
  q.per_chip = get_or(j, "per_chip", q.per_chip);
  const std::string mode = get_or<std::string>(j, "adc_mode", "calibrated");
  if (mode == "calibrated") {
    q.adc_mode = AdcMode::calibrated;
  } else if (mode == "uniform") {
    q.adc_mode = AdcMode::uniform;
  } else if (mode == "exact") {
    q.adc_mode = AdcMode::exact;
  } else {
    throw ConfigError("quantizer.adc_mode must be calibrated, uniform or exact");
  }
  if (q.input_bits < 1 || q.input_bits > 24 || q.adc_bits < 1 || q.adc_bits > 16) {
    throw ConfigError("quantizer: input_bits in [1,24], adc_bits in [1,16]");
  }
  return q;
}

TechConfig parse_tech(const json& j) {
  require_keys(j, "tech",
               {"preset", "clock_hz", "e_array_read_j", "e_adc_j_per_bit", "e_buffer_j_per_bit",
                "e_interconnect_j_per_bit_mm", "a_cell_mm2", "a_adc_mm2", "a_buffer_mm2_per_bit",
                "wire_pitch_mm", "leakage_w"});
  TechConfig t = TechConfig::plausible_22nm();
  if (j.contains("preset") && j.at("preset").get<std::string>() != "plausible-22nm") {
    throw ConfigError("tech.preset: only 'plausible-22nm' ships");
  }
  t.clock_hz = get_or(j, "clock_hz", t.clock_hz);
  t.e_array_read_j = get_or(j, "e_array_read_j", t.e_array_read_j);
  t.e_adc_j_per_bit = get_or(j, "e_adc_j_per_bit", t.e_adc_j_per_bit);
  t.e_buffer_j_per_bit = get_or(j, "e_buffer_j_per_bit", t.e_buffer_j_per_bit);
  t.e_interconnect_j_per_bit_mm =
      get_or(j, "e_interconnect_j_per_bit_mm", t.e_interconnect_j_per_bit_mm);
  t.a_cell_mm2 = get_or(j, "a_cell_mm2", t.a_cell_mm2);
  t.a_adc_mm2 = get_or(j, "a_adc_mm2", t.a_adc_mm2);
  t.a_buffer_mm2_per_bit = get_or(j, "a_buffer_mm2_per_bit", t.a_buffer_mm2_per_bit);
  t.wire_pitch_mm = get_or(j, "wire_pitch_mm", t.wire_pitch_mm);
  t.leakage_w = get_or(j, "leakage_w", t.leakage_w);
  try {
    t.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("tech: ") + e.what());
  }
  return t;
}

}  // namespace

ExperimentConfig parse_experiment_config_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  require_keys(j, "<root>",
               {"experiment", "seed", "out_dir", "threads", "device", "meminductor", "crossbar",
                "quantizer", "training", "tech", "hysteresis", "sweep", "amoeba", "cost", "vmm"});

  ExperimentConfig c;
  if (!j.contains("experiment")) throw ConfigError("config: 'experiment' is required");
  c.experiment = j.at("experiment").get<std::string>();
  const std::set<std::string> kinds{"train", "vmm-bench", "hysteresis", "sweep", "amoeba", "cost"};
  if (!kinds.count(c.experiment)) {
    throw ConfigError("config: unknown experiment kind '" + c.experiment + "'");
  }
  c.seed = get_or<std::uint64_t>(j, "seed", 0);
  c.out_dir = get_or<std::string>(j, "out_dir", "out");
  c.threads = get_or(j, "threads", 0);

  c.device = parse_device(j.value("device", json::object()));
  c.meminductor = parse_meminductor(j.value("meminductor", json::object()));
  const CrossbarConfig xbar = parse_crossbar(j.value("crossbar", json::object()));
  const QuantizerSettings quant = parse_quantizer(j.value("quantizer", json::object()));
  c.tech = parse_tech(j.value("tech", json::object()));

  {
    const json h = j.value("hysteresis", json::object());
    require_keys(h, "hysteresis", {"v_m", "freq_hz", "cycles", "steps_per_cycle"});
    c.hysteresis.v_m = get_or(h, "v_m", c.hysteresis.v_m);
    c.hysteresis.freq_hz = get_or(h, "freq_hz", c.hysteresis.freq_hz);
    c.hysteresis.cycles = get_or(h, "cycles", c.hysteresis.cycles);
    c.hysteresis.steps_per_cycle = get_or(h, "steps_per_cycle", c.hysteresis.steps_per_cycle);
  }
  {
    const json s = j.value("sweep", json::object());
    require_keys(s, "sweep", {"param", "values", "v_m", "freq_hz", "cycles", "steps_per_cycle"});
    c.sweep.param = get_or<std::string>(s, "param", c.sweep.param);
    const std::set<std::string> params{"freq_hz", "v_m", "gm_scale", "v_t_delta"};
    if (!params.count(c.sweep.param)) {
      throw ConfigError("sweep.param must be one of freq_hz, v_m, gm_scale, v_t_delta");
    }
    c.sweep.values = get_or(s, "values", std::vector<double>{});
    c.sweep.base = c.hysteresis;
    c.sweep.base.v_m = get_or(s, "v_m", c.sweep.base.v_m);
    c.sweep.base.freq_hz = get_or(s, "freq_hz", c.sweep.base.freq_hz);
    c.sweep.base.cycles = get_or(s, "cycles", c.sweep.base.cycles);
    c.sweep.base.steps_per_cycle = get_or(s, "steps_per_cycle", c.sweep.base.steps_per_cycle);
  }
  {
    const json a = j.value("amoeba", json::object());
    require_keys(a, "amoeba",
                 {"r_ohm", "c_farad", "baseline_v", "dip_depth_v", "dip_period_s", "dip_width_s",
                  "duration_s", "dt_s", "gm3_scale"});
    c.amoeba.r_ohm = get_or(a, "r_ohm", c.amoeba.r_ohm);
    c.amoeba.c_farad = get_or(a, "c_farad", c.amoeba.c_farad);
    c.amoeba.baseline_v = get_or(a, "baseline_v", c.amoeba.baseline_v);
    c.amoeba.dip_depth_v = get_or(a, "dip_depth_v", c.amoeba.dip_depth_v);
    c.amoeba.dip_period_s = get_or(a, "dip_period_s", c.amoeba.dip_period_s);
    c.amoeba.dip_width_s = get_or(a, "dip_width_s", c.amoeba.dip_width_s);
    c.amoeba.duration_s = get_or(a, "duration_s", c.amoeba.duration_s);
    c.amoeba.dt_s = get_or(a, "dt_s", c.amoeba.dt_s);
    c.amoeba.gm3_scale = get_or(a, "gm3_scale", c.amoeba.gm3_scale);
  }
  {
    const json k = j.value("cost", json::object());
    require_keys(k, "cost", {"network", "samples", "input_bits", "adc_bits", "array_size"});
    c.cost.network = get_or<std::string>(k, "network", c.cost.network);
    c.cost.samples = get_or(k, "samples", c.cost.samples);
    c.cost.input_bits = get_or(k, "input_bits", c.cost.input_bits);
    c.cost.adc_bits = get_or(k, "adc_bits", c.cost.adc_bits);
    c.cost.array_size = get_or(k, "array_size", c.cost.array_size);
  }
  {
    const json v = j.value("vmm", json::object());
    require_keys(v, "vmm", {"rows", "cols", "cases", "r_line_values"});
    c.vmm.rows = get_or(v, "rows", c.vmm.rows);
    c.vmm.cols = get_or(v, "cols", c.vmm.cols);
    c.vmm.cases = get_or(v, "cases", c.vmm.cases);
    c.vmm.r_line_values = get_or(v, "r_line_values", c.vmm.r_line_values);
  }
  {
    const json t = j.value("training", json::object());
    require_keys(t, "training",
                 {"network", "hidden", "dataset_dir", "train_images", "train_labels",
                  "test_images", "test_labels", "mode", "lr", "epochs", "batch", "val_fraction",
                  "train_limit", "test_limit", "parasitic", "backward_target_weights",
                  "array_rows", "w_clip_scale", "record_wall_time", "dump_calibration"});
    c.training.network = get_or<std::string>(t, "network", c.training.network);
    const std::set<std::string> nets{"mnist-cnn", "mnist-mlp", "vgg8"};
    if (!nets.count(c.training.network)) {
      throw ConfigError("training.network must be mnist-cnn, mnist-mlp or vgg8");
    }
    c.training.hidden = get_or(t, "hidden", c.training.hidden);
    c.training.dataset_dir = get_or<std::string>(t, "dataset_dir", "");
    c.training.train_images = get_or<std::string>(t, "train_images", "train-images-idx3-ubyte");
    c.training.train_labels = get_or<std::string>(t, "train_labels", "train-labels-idx1-ubyte");
    c.training.test_images = get_or<std::string>(t, "test_images", "t10k-images-idx3-ubyte");
    c.training.test_labels = get_or<std::string>(t, "test_labels", "t10k-labels-idx1-ubyte");
    c.training.dump_calibration = get_or(t, "dump_calibration", c.training.dump_calibration);

    TrainConfig& tc = c.training.train;
    tc.seed = c.seed;
    tc.lr = get_or(t, "lr", tc.lr);
    tc.epochs = get_or(t, "epochs", tc.epochs);
    tc.batch = get_or(t, "batch", tc.batch);
    tc.val_fraction = get_or(t, "val_fraction", tc.val_fraction);
    tc.train_limit = get_or(t, "train_limit", tc.train_limit);
    tc.test_limit = get_or(t, "test_limit", tc.test_limit);
    tc.record_wall_time = get_or(t, "record_wall_time", tc.record_wall_time);
    tc.analog.device = c.device;
    tc.analog.xbar = xbar;
    tc.analog.quant = quant;
    tc.analog.parasitic = get_or(t, "parasitic", tc.analog.parasitic);
    tc.analog.backward_target_weights =
        get_or(t, "backward_target_weights", tc.analog.backward_target_weights);
    tc.analog.array_rows = get_or(t, "array_rows", tc.analog.array_rows);
    tc.analog.w_clip_scale = get_or(t, "w_clip_scale", tc.analog.w_clip_scale);
    const std::string mode = get_or<std::string>(t, "mode", "ideal");
    if (mode == "ideal") {
      tc.analog.mode = AnalogPathMode::ideal;
    } else if (mode == "nonideal") {
      tc.analog.mode = AnalogPathMode::nonideal;
    } else {
      throw ConfigError("training.mode must be ideal or nonideal");
    }
    try {
      tc.validate();
    } catch (const std::exception& e) {
      throw ConfigError(std::string("training: ") + e.what());
    }
  }

  // Resolved config for the manifest: re-serialize what we parsed with
  // defaults applied (stable key order via nlohmann's sorted maps).
  json resolved = j;
  resolved["experiment"] = c.experiment;
  resolved["seed"] = c.seed;
  resolved["out_dir"] = c.out_dir;
  resolved["threads"] = c.threads;
  c.resolved_json = resolved.dump(2);
  return c;
}

void override_seed(ExperimentConfig& config, std::uint64_t seed) {
  config.seed = seed;
  config.training.train.seed = seed;
  json resolved = json::parse(config.resolved_json);
  resolved["seed"] = seed;
  config.resolved_json = resolved.dump(2);
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_experiment_config_text(ss.str());
}

}  // namespace memsim
