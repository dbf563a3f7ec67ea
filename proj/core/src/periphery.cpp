#include "memsim/periphery.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace memsim {

void QuantizerConfig::validate() const {
  if (input_bits < 1) throw std::invalid_argument("quantizer: input_bits >= 1");
  if (adc_bits < 1) throw std::invalid_argument("quantizer: adc_bits >= 1");
  if (passthrough()) return;
  const std::size_t expected = (1u << adc_bits) - 1;
  if (edges.size() != expected) {
    throw std::invalid_argument("quantizer: edges must have 2^adc_bits - 1 entries");
  }
  if (levels.size() != edges.size() + 1) {
    throw std::invalid_argument("quantizer: levels must have edges+1 entries");
  }
  for (std::size_t i = 1; i < edges.size(); ++i) {
    if (!(edges[i] > edges[i - 1])) {
      throw std::invalid_argument("quantizer: edges must be strictly increasing");
    }
  }
}

QuantizerConfig QuantizerConfig::exact(int input_bits) {
  QuantizerConfig q;
  q.input_bits = input_bits;
  q.adc_bits = 1;
  return q;
}

QuantizerConfig uniform_quantizer(double lo, double hi, int adc_bits, int input_bits) {
  if (!(hi > lo)) throw std::invalid_argument("uniform_quantizer: hi > lo required");
  QuantizerConfig q;
  q.input_bits = input_bits;
  q.adc_bits = adc_bits;
  const int n = 1 << adc_bits;
  const double step = (hi - lo) / n;
  q.edges.resize(static_cast<std::size_t>(n) - 1);
  for (int k = 0; k < n - 1; ++k) q.edges[static_cast<std::size_t>(k)] = lo + k * step;
  q.levels.resize(static_cast<std::size_t>(n));
  for (int c = 0; c < n; ++c) q.levels[static_cast<std::size_t>(c)] = lo + (c - 0.5) * step;
  q.validate();
  return q;
}

QuantizerConfig calibrate_edges(std::span<const double> samples, int adc_bits, int input_bits) {
  const std::size_t n_codes = 1u << adc_bits;
  if (samples.size() < n_codes) {
    throw std::runtime_error("calibrate_edges: need at least 2^adc_bits samples");
  }
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());

  QuantizerConfig q;
  q.input_bits = input_bits;
  q.adc_bits = adc_bits;
  q.edges.resize(n_codes - 1);
  for (std::size_t k = 1; k < n_codes; ++k) {
    const std::size_t idx = k * sorted.size() / n_codes;
    q.edges[k - 1] = sorted[std::min(idx, sorted.size() - 1)];
  }
  for (std::size_t i = 1; i < q.edges.size(); ++i) {
    if (!(q.edges[i] > q.edges[i - 1])) {
      throw std::runtime_error("calibrate_edges: degenerate sample distribution");
    }
  }

  // Level per code: median of the samples falling in the bin.
  q.levels.resize(n_codes);
  std::size_t lo = 0;
  for (std::size_t c = 0; c < n_codes; ++c) {
    std::size_t hi = sorted.size();
    if (c < q.edges.size()) {
      hi = static_cast<std::size_t>(
          std::lower_bound(sorted.begin(), sorted.end(), q.edges[c]) - sorted.begin());
    }
    if (hi > lo) {
      q.levels[c] = sorted[lo + (hi - lo) / 2];
    } else {
      // Empty bin: fall back to the midpoint of the enclosing edges.
      const double a = c == 0 ? sorted.front() : q.edges[c - 1];
      const double b = c < q.edges.size() ? q.edges[c] : sorted.back();
      q.levels[c] = 0.5 * (a + b);
    }
    lo = hi;
  }
  q.validate();
  return q;
}

int adc_quantize(double analog, const QuantizerConfig& config) {
  // Hot path: the config is validated where it is built (uniform_quantizer,
  // calibrate_edges, set_quantizer), not per conversion.
  if (config.passthrough()) {
    throw std::logic_error("adc_quantize: passthrough quantizer has no codes");
  }
  const auto it = std::lower_bound(config.edges.begin(), config.edges.end(), analog);
  return static_cast<int>(it - config.edges.begin());
}

double adc_level(int code, const QuantizerConfig& config) {
  if (code < 0 || static_cast<std::size_t>(code) >= config.levels.size()) {
    throw std::out_of_range("adc_level: code out of range");
  }
  return config.levels[static_cast<std::size_t>(code)];
}

double slice_weight(int slice_index_msb_first, int input_bits) {
  if (slice_index_msb_first == 0) return -std::ldexp(1.0, input_bits - 1);
  return std::ldexp(1.0, input_bits - 1 - slice_index_msb_first);
}

BitSlices encode_input(const Eigen::VectorXd& x, int input_bits) {
  if (input_bits < 1 || input_bits > 24) {
    throw std::invalid_argument("encode_input: input_bits in [1, 24]");
  }
  const double scale = std::ldexp(1.0, input_bits - 1);
  const std::int32_t q_min = static_cast<std::int32_t>(-scale);
  const std::int32_t q_max = static_cast<std::int32_t>(scale) - 1;

  BitSlices enc;
  enc.input_bits = input_bits;
  enc.codes.resize(x.size());
  enc.slices.assign(static_cast<std::size_t>(input_bits), Eigen::VectorXd::Zero(x.size()));
  const std::uint32_t mask = (1u << input_bits) - 1;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (std::isnan(x(i))) throw std::domain_error("encode_input: NaN input");
    // Round-to-nearest-even, then saturate to the representable range.
    const double scaled = x(i) * scale;
    std::int32_t qv = static_cast<std::int32_t>(std::nearbyint(scaled));
    qv = std::clamp(qv, q_min, q_max);
    enc.codes(i) = qv;
    const std::uint32_t u = static_cast<std::uint32_t>(qv) & mask;
    for (int s = 0; s < input_bits; ++s) {
      const int bit = input_bits - 1 - s;  // slice 0 holds the MSB
      enc.slices[static_cast<std::size_t>(s)](i) = (u >> bit) & 1u;
    }
  }
  return enc;
}

Eigen::VectorXd decode_input(const BitSlices& enc) {
  Eigen::VectorXd acc = shift_accumulate(enc.slices, enc.input_bits);
  return acc / std::ldexp(1.0, enc.input_bits - 1);
}

BulkQuantizer::BulkQuantizer(const QuantizerConfig& config) {
  config.validate();
  if (config.passthrough()) {
    throw std::invalid_argument("BulkQuantizer: passthrough config has no edges");
  }
  edges_ = config.edges;
  levels_ = config.levels;
  const int buckets = 512;
  lo_ = edges_.front();
  const double hi = edges_.back();
  inv_width_ = hi > lo_ ? buckets / (hi - lo_) : 0.0;
  bucket_code_.resize(buckets + 1);
  for (int b = 0; b <= buckets; ++b) {
    const double start = lo_ + static_cast<double>(b) / inv_width_;
    bucket_code_[static_cast<std::size_t>(b)] = static_cast<int>(
        std::lower_bound(edges_.begin(), edges_.end(), start) - edges_.begin());
  }
}

double BulkQuantizer::quantize_to_level(double analog) const {
  const int n_edges = static_cast<int>(edges_.size());
  int code;
  if (analog < lo_) {
    code = 0;
  } else if (analog > edges_.back()) {
    code = n_edges;
  } else {
    const int bucket = std::min(static_cast<int>((analog - lo_) * inv_width_),
                                static_cast<int>(bucket_code_.size()) - 2);
    code = bucket_code_[static_cast<std::size_t>(bucket)];
    while (code < n_edges && edges_[static_cast<std::size_t>(code)] < analog) ++code;
  }
  return levels_[static_cast<std::size_t>(code)];
}

void BulkQuantizer::apply_in_place(Eigen::MatrixXd& values) const {
  double* p = values.data();
  const Eigen::Index n = values.size();
  for (Eigen::Index k = 0; k < n; ++k) p[k] = quantize_to_level(p[k]);
}

Eigen::VectorXd shift_accumulate(const std::vector<Eigen::VectorXd>& values_per_slice,
                                 int input_bits) {
  if (static_cast<int>(values_per_slice.size()) != input_bits) {
    throw std::invalid_argument("shift_accumulate: one value vector per input bit required");
  }
  if (values_per_slice.empty()) return {};
  Eigen::VectorXd out = Eigen::VectorXd::Zero(values_per_slice[0].size());
  for (int s = 0; s < input_bits; ++s) {
    const auto& v = values_per_slice[static_cast<std::size_t>(s)];
    if (v.size() != out.size()) throw std::invalid_argument("shift_accumulate: ragged slices");
    out += slice_weight(s, input_bits) * v;
  }
  return out;
}

}  // namespace memsim
