#include "memsim/costmodel.hpp"

#include <cmath>
#include <stdexcept>

namespace memsim {

void TechConfig::validate() const {
  const double vals[] = {clock_hz,       e_array_read_j,    e_adc_j_per_bit,
                         e_buffer_j_per_bit, e_interconnect_j_per_bit_mm, a_cell_mm2,
                         a_adc_mm2,      a_buffer_mm2_per_bit, wire_pitch_mm};
  for (double v : vals) {
    if (!(v > 0.0)) throw std::invalid_argument("tech config: all constants must be positive");
  }
  if (leakage_w < 0.0) throw std::invalid_argument("tech config: leakage >= 0");
}

TechConfig TechConfig::plausible_22nm() { return TechConfig{}; }

std::vector<LayerFootprint> layer_footprints(const NetworkSpec& net) {
  net.validate();
  std::vector<LayerFootprint> out;
  Shape3 cur = net.input;
  const auto shapes = net.activation_shapes();
  for (std::size_t li = 0; li < net.layers.size(); ++li) {
    const LayerSpec& l = net.layers[li];
    LayerFootprint fp;
    if (l.kind == LayerSpec::Kind::conv) {
      // Kernel-position sub-matrices: K*K blocks of (in channels x filters).
      fp.name = "conv" + std::to_string(li + 1);
      fp.rows = cur.c;
      fp.cols = l.units;
      fp.blocks = l.kernel * l.kernel;
    } else {
      fp.name = "fc" + std::to_string(li + 1);
      fp.rows = cur.size();
      fp.cols = l.units;
      fp.blocks = 1;
    }
    out.push_back(fp);
    cur = shapes[li];
  }
  return out;
}

namespace {

int ceil_div(int a, int b) { return (a + b - 1) / b; }

int pow2_at_least(int v) {
  int p = 1;
  while (p < v) p *= 2;
  return p;
}

// Tiles needed for one layer at a given tile edge (in arrays): blocks that
// fit share tiles, oversized blocks span several.
std::int64_t tiles_for_layer(const LayerFootprint& fp, int array_size, int tile_arrays) {
  const int ar = ceil_div(fp.rows, array_size);
  const int ac = ceil_div(fp.cols, array_size);
  if (ar <= tile_arrays && ac <= tile_arrays) {
    const int per_tile = (tile_arrays / ar) * (tile_arrays / ac);
    return ceil_div(fp.blocks, per_tile);
  }
  return static_cast<std::int64_t>(fp.blocks) * ceil_div(ar, tile_arrays) *
         ceil_div(ac, tile_arrays);
}

double utilization_at(const std::vector<LayerFootprint>& fps, int array_size, int tile_arrays) {
  std::int64_t mapped = 0, tiles = 0;
  for (const auto& fp : fps) {
    mapped += fp.weight_cells();
    tiles += tiles_for_layer(fp, array_size, tile_arrays);
  }
  const double capacity = static_cast<double>(tiles) * tile_arrays * tile_arrays * array_size *
                          static_cast<double>(array_size);
  return static_cast<double>(mapped) / capacity;
}

}  // namespace

ChipPlan plan_tiles(const NetworkSpec& net, int array_size, const PlanConfig& config) {
  if (array_size < 1) throw std::invalid_argument("plan_tiles: array_size >= 1");
  const auto fps = layer_footprints(net);

  // The initial tile covers the largest layer block.
  int need = 1;
  for (const auto& fp : fps) {
    need = std::max(need, ceil_div(fp.rows, array_size));
    need = std::max(need, ceil_div(fp.cols, array_size));
  }
  const int t_max = pow2_at_least(need);
  // Hierarchy floor: a tile holds at least 2x2 PEs of 2x2 arrays, unless the
  // whole network already fits below that.
  const int t_min = std::min(t_max, std::max(config.pe_arrays, config.min_tile_arrays));

  int best_t = t_max;
  double best_u = utilization_at(fps, array_size, t_max);
  for (int t = t_max; t >= t_min; t /= 2) {
    const double u = utilization_at(fps, array_size, t);
    if (u >= best_u) {  // ties prefer the smaller tile
      best_u = u;
      best_t = t;
    }
  }

  ChipPlan plan;
  plan.array_size = array_size;
  plan.pe_arrays = std::min(config.pe_arrays, best_t);
  plan.tile_arrays = best_t;
  std::int64_t mapped = 0;
  for (const auto& fp : fps) {
    LayerAssignment a;
    a.footprint = fp;
    a.array_rows_blocks = ceil_div(fp.rows, array_size);
    a.array_cols_blocks = ceil_div(fp.cols, array_size);
    a.tiles = static_cast<int>(tiles_for_layer(fp, array_size, best_t));
    a.mapped_cells = fp.weight_cells();
    mapped += a.mapped_cells;
    plan.tiles_total += a.tiles;
    plan.layers.push_back(a);
  }
  plan.utilization = static_cast<double>(mapped) /
                     (static_cast<double>(plan.arrays_total()) * array_size * array_size);
  if (!(plan.utilization > 0.0) || plan.utilization > 1.0) {
    throw std::runtime_error("plan_tiles: utilization out of (0, 1]");
  }
  return plan;
}

HTreeMetrics htree_metrics(int levels, double unit_length_mm, const TechConfig& tech) {
  if (levels < 1) throw std::invalid_argument("htree_metrics: levels >= 1");
  if (!(unit_length_mm > 0.0)) throw std::invalid_argument("htree_metrics: unit_length > 0");
  tech.validate();
  double wl = 0.0;
  for (int l = 1; l <= levels; ++l) {
    wl += std::ldexp(1.0, l) * std::pow(2.0, -std::ceil(l / 2.0));
  }
  HTreeMetrics m;
  m.wirelength_mm = unit_length_mm * wl;
  m.energy_j_per_bit = tech.e_interconnect_j_per_bit_mm * m.wirelength_mm;
  m.latency_s = m.wirelength_mm / tech.wire_pitch_mm / tech.clock_hz;  // segments per cycle
  return m;
}

double TrafficStats::total_macs() const {
  double acc = 0.0;
  for (const auto& l : layers) acc += l.mac_ops;
  return acc;
}

TrafficStats traffic_from_network(const NetworkSpec& net, const ChipPlan& plan, double samples,
                                  int input_bits, int adc_bits) {
  net.validate();
  TrafficStats ts;
  ts.adc_bits = adc_bits;
  const auto fps = layer_footprints(net);
  const auto shapes = net.activation_shapes();
  Shape3 cur = net.input;
  for (std::size_t li = 0; li < fps.size(); ++li) {
    const LayerFootprint& fp = fps[li];
    const LayerSpec& l = net.layers[li];
    const LayerAssignment& asg = plan.layers.at(li);

    double positions = 1.0;
    if (l.kind == LayerSpec::Kind::conv) {
      positions = static_cast<double>(net.same_padding ? cur.h * cur.w
                                                       : (cur.h - l.kernel + 1) *
                                                             (cur.w - l.kernel + 1));
    }
    LayerTraffic t;
    t.name = fp.name;
    const double vectors = samples * positions;  // input vectors through the layer
    const double arrays_per_vector =
        static_cast<double>(fp.blocks) * asg.array_rows_blocks * asg.array_cols_blocks;
    t.array_reads = vectors * arrays_per_vector * input_bits;
    t.adc_conversions = vectors * static_cast<double>(fp.cols) * input_bits;
    t.mac_ops = vectors * static_cast<double>(fp.blocks) * fp.rows * fp.cols;
    const double in_bits = vectors * static_cast<double>(fp.blocks) * fp.rows * input_bits;
    const double out_bits = vectors * static_cast<double>(fp.cols) * (adc_bits + input_bits);
    t.buffer_bits = in_bits + out_bits;
    const HTreeMetrics ht = htree_metrics(
        std::max(1, static_cast<int>(std::ceil(std::log2(std::max(2, asg.tiles))))), 1.0,
        TechConfig{});
    t.interconnect_bit_mm = out_bits * ht.wirelength_mm;
    ts.layers.push_back(t);
    cur = shapes[li];
  }
  return ts;
}

CostReport estimate_costs(const ChipPlan& plan, const NetworkSpec& net,
                          const TrafficStats& traffic, const TechConfig& tech) {
  tech.validate();
  net.validate();
  if (traffic.layers.empty()) throw std::invalid_argument("estimate_costs: traffic is empty");

  CostReport r;
  r.utilization = plan.utilization;

  // Area: device pairs, column ADC groups (one per array), tile buffers.
  const double arrays = static_cast<double>(plan.arrays_total());
  const double cells = arrays * plan.array_size * plan.array_size;
  const double area_cells = cells * tech.a_cell_mm2;
  const double area_adc = arrays * tech.a_adc_mm2;
  const double buffer_bits_per_tile = 8.0 * 1024 * 8;  // 8 KiB in/out buffer per tile
  const double area_buf = plan.tiles_total * buffer_bits_per_tile * tech.a_buffer_mm2_per_bit;
  r.area_parts.parts = {{"arrays", area_cells}, {"adc", area_adc}, {"buffers", area_buf}};
  for (const auto& [k, v] : r.area_parts.parts) r.area_parts.total += v;
  r.area_mm2 = r.area_parts.total;

  // Energy: per-event accounting.
  double e_read = 0.0, e_adc = 0.0, e_buf = 0.0, e_net = 0.0;
  for (const auto& l : traffic.layers) {
    e_read += l.array_reads * tech.e_array_read_j;
    e_adc += l.adc_conversions * traffic.adc_bits * tech.e_adc_j_per_bit;
    e_buf += l.buffer_bits * tech.e_buffer_j_per_bit;
    e_net += l.interconnect_bit_mm * tech.e_interconnect_j_per_bit_mm;
  }
  r.energy_parts.parts = {
      {"array_read", e_read}, {"adc", e_adc}, {"buffer", e_buf}, {"interconnect", e_net}};
  for (const auto& [k, v] : r.energy_parts.parts) r.energy_parts.total += v;
  r.energy_j = r.energy_parts.total;

  // Latency: layers run as pipeline stages; the slowest stage paces the
  // clock, so total latency = max stage latency * stage count.
  double max_stage = 0.0;
  for (const auto& l : traffic.layers) {
    const double events = l.array_reads + l.adc_conversions + l.buffer_bits;
    const double stage = events / tech.clock_hz;
    r.layer_latency_s.emplace_back(l.name, stage);
    max_stage = std::max(max_stage, stage);
  }
  r.latency_s = max_stage * static_cast<double>(traffic.layers.size());

  if (r.latency_s > 0.0) {
    r.avg_power_w = r.energy_j / r.latency_s + tech.leakage_w;
    r.tops = 2.0 * traffic.total_macs() / r.latency_s / 1e12;
    r.tops_per_w = r.tops / r.avg_power_w;
  } else {
    r.avg_power_w = tech.leakage_w;
    r.tops = 0.0;
    r.tops_per_w = 0.0;
  }
  return r;
}

}  // namespace memsim
