#pragma once

#include <Eigen/Core>
#include <span>
#include <vector>

namespace memsim {

// Behavioral ADC description. Codes count edges strictly below the analog
// value; `levels` carries the representative value per code. Empty edges
// denote the infinite-precision quantizer (value passes through), used by
// the exact-pipeline checks.
struct QuantizerConfig {
  int input_bits = 8;
  int adc_bits = 5;
  std::vector<double> edges;   // strictly increasing, 2^adc_bits - 1 entries
  std::vector<double> levels;  // edges.size() + 1 entries

  bool passthrough() const { return edges.empty(); }
  void validate() const;

  static QuantizerConfig exact(int input_bits = 8);
};

// Uniform quantizer over [lo, hi): edges at lo + k*(hi-lo)/2^bits for
// k = 0..2^bits-2, levels at bin centers.
QuantizerConfig uniform_quantizer(double lo, double hi, int adc_bits, int input_bits = 8);

// Nonlinear quantizer calibrated on observed partial sums: edges at
// equal-probability quantiles, levels at bin medians.
QuantizerConfig calibrate_edges(std::span<const double> partial_sum_samples, int adc_bits,
                                int input_bits = 8);

// Code = number of edges strictly below `analog`; saturates at both ends.
int adc_quantize(double analog, const QuantizerConfig& config);
// Representative value for a code (the analog itself in passthrough mode is
// handled by callers; this indexes `levels`).
double adc_level(int code, const QuantizerConfig& config);

// Signed fixed-point bit planes of a vector, two's complement, MSB first:
// slices[0] is the sign plane. Values quantize to input_bits integers by
// round-to-nearest-even of x * 2^(input_bits-1).
struct BitSlices {
  int input_bits = 0;
  Eigen::VectorXi codes;                // quantized signed integers
  std::vector<Eigen::VectorXd> slices;  // 0/1 planes, MSB first
};

BitSlices encode_input(const Eigen::VectorXd& x, int input_bits);

// Inverse of encode_input up to the quantization step.
Eigen::VectorXd decode_input(const BitSlices& enc);

// out = sum_k w_k * slice_k with two's complement plane weights:
// w = -2^(b-1) for the MSB plane, +2^(b-1-k) for the rest (MSB-first order).
Eigen::VectorXd shift_accumulate(const std::vector<Eigen::VectorXd>& values_per_slice,
                                 int input_bits);

// Plane weight helper shared by vector and matrix pipelines.
double slice_weight(int slice_index_msb_first, int input_bits);

// Bucketed edge index for bulk conversions: one multiply plus a short scan
// per sample instead of a binary search. Behaves exactly like adc_quantize
// followed by adc_level.
class BulkQuantizer {
 public:
  BulkQuantizer() = default;
  explicit BulkQuantizer(const QuantizerConfig& config);

  bool ready() const { return !levels_.empty(); }
  double quantize_to_level(double analog) const;
  void apply_in_place(Eigen::MatrixXd& values) const;

 private:
  std::vector<double> edges_;
  std::vector<double> levels_;
  std::vector<int> bucket_code_;  // lower code bound per bucket
  double lo_ = 0.0;
  double inv_width_ = 0.0;
};

}  // namespace memsim
