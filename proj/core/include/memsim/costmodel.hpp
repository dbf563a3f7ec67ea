#pragma once

#include <string>
#include <vector>

#include "memsim/network.hpp"

namespace memsim {

// Per-event energy/latency/area constants. The real transistor-library
// numbers are proprietary; the shipped "plausible-22nm" preset is a
// documented non-authoritative stand-in and every value is a config input.
struct TechConfig {
  double clock_hz = 1e9;
  double e_array_read_j = 2e-12;          // one array activation (row cycle)
  double e_adc_j_per_bit = 0.4e-12;       // per conversion bit
  double e_buffer_j_per_bit = 0.05e-12;   // per bit read+write
  double e_interconnect_j_per_bit_mm = 0.2e-12;
  double a_cell_mm2 = 5e-8;               // per device pair
  double a_adc_mm2 = 1.5e-3;              // per column ADC group
  double a_buffer_mm2_per_bit = 1e-7;
  double wire_pitch_mm = 2e-4;
  double leakage_w = 0.0;

  void validate() const;
  static TechConfig plausible_22nm();
};

// Weight-matrix footprint of one layer, in device cells.
struct LayerFootprint {
  std::string name;
  int rows = 0;        // fan-in rows of one mapped block
  int cols = 0;        // output columns
  int blocks = 1;      // kernel-position sub-matrices mapped separately
  std::int64_t weight_cells() const {
    return static_cast<std::int64_t>(rows) * cols * blocks;
  }
};

std::vector<LayerFootprint> layer_footprints(const NetworkSpec& net);

struct LayerAssignment {
  LayerFootprint footprint;
  int array_rows_blocks = 0;  // arrays per block, row direction
  int array_cols_blocks = 0;  // arrays per block, column direction
  int tiles = 0;
  std::int64_t mapped_cells = 0;
};

struct ChipPlan {
  int array_size = 128;    // square device arrays
  int pe_arrays = 2;       // arrays per PE side
  int tile_arrays = 4;     // arrays per tile side (pe_arrays * PEs per side)
  int tiles_total = 0;
  std::vector<LayerAssignment> layers;
  double utilization = 0.0;  // weight-mapped cells / cells of all instantiated arrays

  int pes_per_tile() const {
    const int per_side = tile_arrays / pe_arrays;
    return per_side * per_side;
  }
  std::int64_t arrays_total() const {
    return static_cast<std::int64_t>(tiles_total) * tile_arrays * tile_arrays;
  }
};

struct PlanConfig {
  int pe_arrays = 2;        // fixed 2x2 arrays per PE
  int min_tile_arrays = 4;  // hierarchy floor: 2x2 PEs of 2x2 arrays
};

// Tile-size search: the initial tile covers the largest layer block; the
// size then halves while utilization improves (never below the hierarchy
// floor, unless the whole network fits under it). Ties prefer the smaller
// tile.
ChipPlan plan_tiles(const NetworkSpec& net, int array_size, const PlanConfig& config = {});

struct HTreeMetrics {
  double wirelength_mm = 0.0;
  double latency_s = 0.0;
  double energy_j_per_bit = 0.0;
};

// Standard H-tree recursion: total wirelength =
// unit_length * sum_{l=1..levels} 2^l * 2^(-ceil(l/2)).
HTreeMetrics htree_metrics(int levels, double unit_length_mm, const TechConfig& tech);

// Event counts from a training/inference run (or synthesized from the
// network shape for planning studies).
struct LayerTraffic {
  std::string name;
  double array_reads = 0.0;       // array activations
  double adc_conversions = 0.0;   // column conversions
  double buffer_bits = 0.0;       // bits moved through tile buffers
  double interconnect_bit_mm = 0.0;
  double mac_ops = 0.0;
};

struct TrafficStats {
  std::vector<LayerTraffic> layers;
  int adc_bits = 5;

  double total_macs() const;
};

// Synthesizes per-layer traffic for `samples` inputs through the plan.
TrafficStats traffic_from_network(const NetworkSpec& net, const ChipPlan& plan, double samples,
                                  int input_bits, int adc_bits);

struct CostBreakdown {
  std::vector<std::pair<std::string, double>> parts;
  double total = 0.0;
};

struct CostReport {
  double area_mm2 = 0.0;
  double latency_s = 0.0;        // pipeline latency for the traffic block
  double energy_j = 0.0;         // dynamic energy
  double avg_power_w = 0.0;      // energy / latency + leakage
  double tops = 0.0;             // 2 ops per MAC
  double tops_per_w = 0.0;
  double utilization = 0.0;
  CostBreakdown area_parts;
  CostBreakdown energy_parts;
  std::vector<std::pair<std::string, double>> layer_latency_s;
};

CostReport estimate_costs(const ChipPlan& plan, const NetworkSpec& net,
                          const TrafficStats& traffic, const TechConfig& tech);

// Reference VGG-8 (CIFAR-10 scale) used for planning studies.
NetworkSpec vgg8_network();

}  // namespace memsim
