#include "memsim/analog_net.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace memsim {

namespace {

// Pulses the cell can still absorb in the given direction. The guard
// absorbs the second-order LTP/LTD position asymmetry (~1e-7 pulses near
// the linear limit) so a railed device never over-reports by one.
int headroom(const DeviceState& cell, PulseDirection dir, const DeviceParams& params) {
  const double a = cell.a_for(params, dir == PulseDirection::ltd);
  const double p = invert_curve(cell.x, dir, params, a);
  const int room = static_cast<int>(std::floor(params.p_max - p + 1e-6));
  return std::clamp(room, 0, params.p_max);
}

}  // namespace

AnalogLayer::AnalogLayer(std::string name, int blocks, int in_rows, int cols,
                         const AnalogConfig& cfg, double init_limit, Rng& rng)
    : name_(std::move(name)), blocks_(blocks), in_rows_(in_rows), cols_(cols), cfg_(cfg) {
  if (blocks < 1 || in_rows < 1 || cols < 1) {
    throw std::invalid_argument("analog layer: bad dimensions");
  }
  const std::int64_t cells = static_cast<std::int64_t>(blocks) * in_rows * cols;
  if (cells > cfg.max_cells_per_layer) {
    throw std::runtime_error("analog layer '" + name_ + "' exceeds configured array budget");
  }

  w_clip_ = cfg.w_clip_scale * init_limit;
  // Differential scheme: the declared weight range is symmetric, so one
  // program pulse moves the pair by (w_max - w_min)/p_max.
  mapping_ = WeightMapping{-w_clip_, w_clip_, cfg.device.x_max, cfg.device.x_min};
  step_ = (mapping_.w_max - mapping_.w_min) / cfg.device.p_max;

  w_float_.resize(stacked_rows(), cols_);
  for (Eigen::Index i = 0; i < w_float_.rows(); ++i) {
    for (Eigen::Index j = 0; j < w_float_.cols(); ++j) {
      w_float_(i, j) = rng.uniform(-init_limit, init_limit);
    }
  }
  residual_ = Eigen::MatrixXd::Zero(stacked_rows(), cols_);

  // Balanced row tiles within a block, each at most array_rows tall.
  const int tiles = (in_rows_ + cfg.array_rows - 1) / cfg.array_rows;
  int row0 = 0;
  for (int t = 0; t < tiles; ++t) {
    const int rows = (in_rows_ - row0) / (tiles - t);
    tile_rows_.emplace_back(row0, rows);
    row0 += rows;
  }

  if (cfg.mode == AnalogPathMode::nonideal) {
    arrays_.resize(static_cast<std::size_t>(blocks_));
    for (int b = 0; b < blocks_; ++b) {
      for (std::size_t t = 0; t < tile_rows_.size(); ++t) {
        const auto [r0, rows] = tile_rows_[t];
        const Eigen::MatrixXd w_tile = w_float_.block(b * in_rows_ + r0, 0, rows, cols_);
        Rng tile_rng = rng.split((static_cast<std::uint64_t>(b) << 20) + t + 1);
        arrays_[static_cast<std::size_t>(b)].push_back(
            map_weights(w_tile, mapping_, cfg.device, cfg.xbar, tile_rng));
      }
    }
    solvers_.resize(arrays_.size());
    for (auto& s : solvers_) s.resize(tile_rows_.size());
  }
  eff_dirty_ = true;
}

const CrossbarArray& AnalogLayer::array_at(int block, int tile) const {
  return arrays_.at(static_cast<std::size_t>(block)).at(static_cast<std::size_t>(tile));
}

const Eigen::MatrixXd& AnalogLayer::effective_weights() const {
  if (cfg_.mode == AnalogPathMode::ideal) return w_float_;
  refresh_effective();
  return w_eff_;
}

void AnalogLayer::refresh_effective() const {
  if (!eff_dirty_) return;
  w_eff_.resize(stacked_rows(), cols_);
  for (int b = 0; b < blocks_; ++b) {
    for (std::size_t t = 0; t < tile_rows_.size(); ++t) {
      const auto [r0, rows] = tile_rows_[t];
      w_eff_.block(b * in_rows_ + r0, 0, rows, cols_) =
          read_effective_weights(array_at(b, static_cast<int>(t)));
    }
  }
  eff_dirty_ = false;
}

void AnalogLayer::rebuild_solvers() const {
  for (int b = 0; b < blocks_; ++b) {
    for (std::size_t t = 0; t < tile_rows_.size(); ++t) {
      solvers_[static_cast<std::size_t>(b)][t] =
          std::make_unique<ParasiticSolver>(array_at(b, static_cast<int>(t)));
    }
  }
}

void AnalogLayer::set_quantizer(const QuantizerConfig& q) {
  q.validate();
  quant_ = q;
  bulk_quant_ = BulkQuantizer(q);
  quant_ready_ = true;
}

void AnalogLayer::collect_calibration_samples(const Eigen::MatrixXd& x,
                                              std::vector<double>& out) const {
  const Eigen::MatrixXd& w = effective_weights();
  const Eigen::Index n = std::min<Eigen::Index>(x.rows(), 2048);
  const double scale = x.topRows(n).cwiseAbs().maxCoeff();
  if (scale == 0.0) return;
  const BitSlices planes = [&] {
    Eigen::VectorXd flat(n * x.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
      flat.segment(i * x.cols(), x.cols()) = (x.row(i) / scale).transpose();
    }
    return encode_input(flat, cfg_.quant.input_bits);
  }();
  for (int s = 0; s < cfg_.quant.input_bits; ++s) {
    Eigen::MatrixXd plane(n, x.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
      plane.row(i) =
          planes.slices[static_cast<std::size_t>(s)].segment(i * x.cols(), x.cols()).transpose();
    }
    for (int b = 0; b < blocks_; ++b) {
      for (const auto& [r0, rows] : tile_rows_) {
        const Eigen::MatrixXd part = plane.middleCols(b * in_rows_ + r0, rows) *
                                     w.block(b * in_rows_ + r0, 0, rows, cols_);
        out.insert(out.end(), part.data(), part.data() + part.size());
      }
    }
  }
}

Eigen::MatrixXd AnalogLayer::analog_matmul(const Eigen::MatrixXd& x,
                                           AnalogTrafficCounters* traffic) const {
  if (x.cols() != stacked_rows()) throw std::invalid_argument("analog_matmul: shape mismatch");
  if (cfg_.mode == AnalogPathMode::ideal) return x * w_float_;

  const int bits = cfg_.quant.input_bits;
  const bool exact_adc = cfg_.quant.adc_mode == AdcMode::exact;
  if (!exact_adc && !quant_ready_) {
    throw std::logic_error("analog_matmul: ADC not calibrated for layer " + name_);
  }

  const Eigen::Index n = x.rows();
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(n, cols_);
  const double scale = x.cwiseAbs().maxCoeff();
  if (scale == 0.0) return y;

  // Bit planes of the scaled input, encoded once for all blocks. Same
  // quantization rule as encode_input, applied matrix-wide.
  std::vector<Eigen::MatrixXd> planes(static_cast<std::size_t>(bits),
                                      Eigen::MatrixXd(n, x.cols()));
  {
    const double q_scale = std::ldexp(1.0, bits - 1);
    const std::int32_t q_min = static_cast<std::int32_t>(-q_scale);
    const std::int32_t q_max = static_cast<std::int32_t>(q_scale) - 1;
    const std::uint32_t mask = (1u << bits) - 1;
    const double* src = x.data();
    const Eigen::Index total = x.size();
    std::vector<double*> dst(static_cast<std::size_t>(bits));
    for (int s = 0; s < bits; ++s) dst[static_cast<std::size_t>(s)] = planes[static_cast<std::size_t>(s)].data();
    for (Eigen::Index k = 0; k < total; ++k) {
      if (std::isnan(src[k])) throw std::domain_error("analog_matmul: NaN input");
      std::int32_t q = static_cast<std::int32_t>(std::nearbyint(src[k] / scale * q_scale));
      q = std::clamp(q, q_min, q_max);
      const std::uint32_t u = static_cast<std::uint32_t>(q) & mask;
      for (int s = 0; s < bits; ++s) {
        dst[static_cast<std::size_t>(s)][k] = (u >> (bits - 1 - s)) & 1u;
      }
    }
  }

  const Eigen::MatrixXd& w = effective_weights();
  const double kappa = mapping_.state_scale();
  if (cfg_.parasitic && solvers_.empty() == false && !solvers_[0].empty() &&
      solvers_[0][0] == nullptr) {
    rebuild_solvers();
  }

  for (int b = 0; b < blocks_; ++b) {
    for (std::size_t t = 0; t < tile_rows_.size(); ++t) {
      const auto [r0, rows] = tile_rows_[t];
      Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(n, cols_);
      for (int s = 0; s < bits; ++s) {
        Eigen::MatrixXd part;
        if (cfg_.parasitic && array_at(b, static_cast<int>(t)).config().r_line > 0.0) {
          // Physical read: bits drive the wire grid at v_read; currents
          // rescale to weight units.
          const Eigen::MatrixXd v =
              cfg_.xbar.v_read *
              planes[static_cast<std::size_t>(s)].middleCols(b * in_rows_ + r0, rows).transpose();
          part = solvers_[static_cast<std::size_t>(b)][t]->solve(v).transpose() /
                 (cfg_.xbar.v_read * kappa);
        } else {
          part = planes[static_cast<std::size_t>(s)].middleCols(b * in_rows_ + r0, rows) *
                 w.block(b * in_rows_ + r0, 0, rows, cols_);
        }
        if (!exact_adc) bulk_quant_.apply_in_place(part);
        acc += slice_weight(s, bits) * part;
      }
      y += acc;
      if (traffic) {
        traffic->array_reads += static_cast<double>(n) * bits;
        traffic->adc_conversions += static_cast<double>(n) * bits * cols_;
      }
    }
  }
  return y * (scale / std::ldexp(1.0, bits - 1));
}

void AnalogLayer::apply_update_ideal(const Eigen::MatrixXd& delta_w) {
  w_float_ = (w_float_ + delta_w).cwiseMax(-w_clip_).cwiseMin(w_clip_);
}

void AnalogLayer::apply_update(const Eigen::MatrixXd& delta_w, Rng& rng) {
  if (delta_w.rows() != stacked_rows() || delta_w.cols() != cols_) {
    throw std::invalid_argument("apply_update: shape mismatch");
  }
  const DeviceParams& dev = cfg_.device;
  const double res_cap = dev.p_max * step_;
  for (int b = 0; b < blocks_; ++b) {
    for (std::size_t t = 0; t < tile_rows_.size(); ++t) {
      const auto [r0, rows] = tile_rows_[t];
      CrossbarArray& arr = arrays_[static_cast<std::size_t>(b)][t];
      for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols_; ++j) {
          const Eigen::Index gi = b * in_rows_ + r0 + i;
          double want = delta_w(gi, j) + residual_(gi, j);
          int n = static_cast<int>(std::lround(want / step_));
          n = std::clamp(n, -dev.p_max, dev.p_max);
          double res = want - n * step_;
          residual_(gi, j) = std::clamp(res, -res_cap, res_cap);
          if (n == 0) continue;

          DeviceState& pos = arr.pos().at(i, j);
          DeviceState& neg = arr.neg().at(i, j);
          if (n > 0) {
            // Raise w+: potentiate the positive device, spill the
            // remainder into depressing the negative one.
            const int n1 = std::min(n, headroom(pos, PulseDirection::ltp, dev));
            if (n1 > 0) pos = apply_pulses(pos, n1, dev, rng);
            const int n2 = std::min(n - n1, headroom(neg, PulseDirection::ltd, dev));
            if (n2 > 0) neg = apply_pulses(neg, -n2, dev, rng);
          } else {
            const int m = -n;
            const int n1 = std::min(m, headroom(pos, PulseDirection::ltd, dev));
            if (n1 > 0) pos = apply_pulses(pos, -n1, dev, rng);
            const int n2 = std::min(m - n1, headroom(neg, PulseDirection::ltp, dev));
            if (n2 > 0) neg = apply_pulses(neg, n2, dev, rng);
          }
        }
      }
    }
  }
  // Keep the software target in sync for diagnostics/ablation.
  w_float_ = (w_float_ + delta_w).cwiseMax(-w_clip_).cwiseMin(w_clip_);
  eff_dirty_ = true;
  if (cfg_.parasitic) {
    for (auto& per_block : solvers_) {
      for (auto& s : per_block) s.reset();
    }
  }
}

// ---------------------------------------------------------------------------

AnalogNetwork::AnalogNetwork(NetworkSpec spec, AnalogConfig cfg, Rng& rng)
    : spec_(std::move(spec)), cfg_(cfg) {
  spec_.validate();
  cfg_.device.validate();
  cfg_.xbar.validate();

  Shape3 cur = spec_.input;
  const auto shapes = spec_.activation_shapes();
  for (std::size_t li = 0; li < spec_.layers.size(); ++li) {
    const LayerSpec& l = spec_.layers[li];
    ConvGeometry g;
    g.in = cur;
    Rng layer_rng = rng.split(li + 1);
    if (l.kind == LayerSpec::Kind::conv) {
      const int k = l.kernel;
      const int pad = spec_.same_padding ? k / 2 : 0;
      g.conv = {spec_.same_padding ? cur.h : cur.h - k + 1,
                spec_.same_padding ? cur.w : cur.w - k + 1, l.units};
      g.out = shapes[li];
      g.positions = g.conv.h * g.conv.w;
      g.gather.resize(static_cast<std::size_t>(g.positions) * k * k);
      std::size_t gi = 0;
      for (int y = 0; y < g.conv.h; ++y) {
        for (int x = 0; x < g.conv.w; ++x) {
          for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
              const int sy = y + ky - pad;
              const int sx = x + kx - pad;
              g.gather[gi++] = (sy < 0 || sy >= cur.h || sx < 0 || sx >= cur.w)
                                   ? -1
                                   : sy * cur.w + sx;
            }
          }
        }
      }
      const double fan_in = static_cast<double>(k) * k * cur.c;
      const double fan_out = static_cast<double>(k) * k * l.units;
      const double limit = std::sqrt(6.0 / (fan_in + fan_out));
      layers_.emplace_back(spec_.name + "/conv" + std::to_string(li), k * k, cur.c, l.units,
                           cfg_, limit, layer_rng);
    } else {
      g.conv = g.out = shapes[li];
      const double fan_in = cur.size();
      const double limit = std::sqrt(6.0 / (fan_in + l.units));
      layers_.emplace_back(spec_.name + "/dense" + std::to_string(li), 1, cur.size(), l.units,
                           cfg_, limit, layer_rng);
    }
    geom_.push_back(std::move(g));
    cur = shapes[li];
  }
}

Eigen::MatrixXd AnalogNetwork::layer_input_columns(std::size_t li, const Eigen::MatrixXd& input,
                                                   int batch) const {
  const LayerSpec& l = spec_.layers[li];
  const ConvGeometry& g = geom_[li];
  if (l.kind == LayerSpec::Kind::dense) {
    if (input.cols() != g.in.size()) throw std::invalid_argument("dense input shape mismatch");
    return input;
  }
  const int k = l.kernel;
  const int kk = k * k;
  const int d = g.in.c;
  Eigen::MatrixXd x_col(static_cast<Eigen::Index>(batch) * g.positions, kk * d);
  for (int b = 0; b < batch; ++b) {
    for (int p = 0; p < g.positions; ++p) {
      const Eigen::Index row = static_cast<Eigen::Index>(b) * g.positions + p;
      for (int kp = 0; kp < kk; ++kp) {
        const int src = g.gather[static_cast<std::size_t>(p) * kk + kp];
        for (int c = 0; c < d; ++c) {
          x_col(row, kp * d + c) = src < 0 ? 0.0 : input(b, src * d + c);
        }
      }
    }
  }
  return x_col;
}

Eigen::MatrixXd AnalogNetwork::forward(const Eigen::MatrixXd& batch, ForwardCache* cache) const {
  const int n = static_cast<int>(batch.rows());
  if (batch.cols() != spec_.input.size()) {
    throw std::invalid_argument("forward: input size mismatch");
  }
  if (cache) {
    cache->layers.clear();
    cache->layers.resize(layers_.size());
  }

  Eigen::MatrixXd cur = batch;
  for (std::size_t li = 0; li < layers_.size(); ++li) {
    const LayerSpec& l = spec_.layers[li];
    const ConvGeometry& g = geom_[li];
    Eigen::MatrixXd x_col = layer_input_columns(li, cur, n);
    Eigen::MatrixXd z = layers_[li].analog_matmul(x_col, &traffic_);

    ForwardCache::LayerCache* lc = cache ? &cache->layers[li] : nullptr;
    if (lc) {
      lc->x_col = std::move(x_col);
      lc->in_shape = g.in;
      lc->conv_shape = g.conv;
      lc->out_shape = g.out;
    }

    if (l.relu) {
      if (lc) lc->relu_mask = (z.array() > 0.0);
      z = z.cwiseMax(0.0);
    }
    if (lc) lc->z = z;

    if (l.kind == LayerSpec::Kind::conv) {
      // z rows: (sample, y, x); columns: channel. Pool when requested, then
      // flatten (y, x, channel)-minor for the next layer.
      const int ch = g.conv.h, cw = g.conv.w, nc = l.units;
      if (l.pool) {
        const int oh = g.out.h, ow = g.out.w;
        Eigen::MatrixXd out(n, static_cast<Eigen::Index>(oh) * ow * nc);
        if (lc) lc->pool_argmax.assign(static_cast<std::size_t>(n) * oh * ow * nc, 0);
        for (int b = 0; b < n; ++b) {
          for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
              for (int c = 0; c < nc; ++c) {
                double best = -std::numeric_limits<double>::infinity();
                Eigen::Index best_row = 0;
                for (int dy = 0; dy < 2; ++dy) {
                  for (int dx = 0; dx < 2; ++dx) {
                    const int y = 2 * oy + dy, x = 2 * ox + dx;
                    const Eigen::Index row =
                        static_cast<Eigen::Index>(b) * g.positions + y * cw + x;
                    if (z(row, c) > best) {
                      best = z(row, c);
                      best_row = row;
                    }
                  }
                }
                out(b, (static_cast<Eigen::Index>(oy) * ow + ox) * nc + c) = best;
                if (lc) {
                  lc->pool_argmax[((static_cast<std::size_t>(b) * oh + oy) * ow + ox) * nc + c] =
                      static_cast<int>(best_row * nc + c);
                }
              }
            }
          }
        }
        cur = std::move(out);
      } else {
        Eigen::MatrixXd out(n, static_cast<Eigen::Index>(ch) * cw * nc);
        for (int b = 0; b < n; ++b) {
          for (int p = 0; p < g.positions; ++p) {
            for (int c = 0; c < nc; ++c) {
              out(b, static_cast<Eigen::Index>(p) * nc + c) =
                  z(static_cast<Eigen::Index>(b) * g.positions + p, c);
            }
          }
        }
        cur = std::move(out);
      }
    } else {
      cur = z;
    }
  }
  if (cache) cache->logits = cur;
  return cur;
}

double AnalogNetwork::softmax_cross_entropy(const Eigen::MatrixXd& logits,
                                            const std::vector<int>& labels,
                                            Eigen::MatrixXd* dlogits) {
  const Eigen::Index n = logits.rows();
  if (static_cast<Eigen::Index>(labels.size()) != n) {
    throw std::invalid_argument("labels/logits mismatch");
  }
  double loss = 0.0;
  if (dlogits) dlogits->resize(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mx = logits.row(i).maxCoeff();
    const Eigen::ArrayXd e = (logits.row(i).transpose().array() - mx).exp();
    const Eigen::ArrayXd p = e / e.sum();
    loss -= std::log(std::max(p(labels[static_cast<std::size_t>(i)]), 1e-300));
    if (dlogits) {
      dlogits->row(i) = p.matrix().transpose() / static_cast<double>(n);
      (*dlogits)(i, labels[static_cast<std::size_t>(i)]) -= 1.0 / static_cast<double>(n);
    }
  }
  return loss / static_cast<double>(n);
}

double AnalogNetwork::accuracy(const Eigen::MatrixXd& logits, const std::vector<int>& labels) {
  int hits = 0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    Eigen::Index arg = 0;
    logits.row(i).maxCoeff(&arg);
    hits += arg == labels[static_cast<std::size_t>(i)];
  }
  return static_cast<double>(hits) / static_cast<double>(logits.rows());
}

std::vector<Eigen::MatrixXd> AnalogNetwork::backward(const ForwardCache& cache,
                                                     const std::vector<int>& labels) const {
  const int n = static_cast<int>(cache.logits.rows());
  std::vector<Eigen::MatrixXd> grads(layers_.size());

  Eigen::MatrixXd d_out;  // gradient w.r.t. the current layer's flattened output
  softmax_cross_entropy(cache.logits, labels, &d_out);

  for (int li = static_cast<int>(layers_.size()) - 1; li >= 0; --li) {
    const LayerSpec& l = spec_.layers[static_cast<std::size_t>(li)];
    const ConvGeometry& g = geom_[static_cast<std::size_t>(li)];
    const auto& lc = cache.layers[static_cast<std::size_t>(li)];

    Eigen::MatrixXd dz;  // gradient at the matmul output (rows match x_col)
    if (l.kind == LayerSpec::Kind::conv) {
      dz = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n) * g.positions, l.units);
      if (l.pool) {
        const int oh = g.out.h, ow = g.out.w;
        for (int b = 0; b < n; ++b) {
          for (int o = 0; o < oh * ow; ++o) {
            for (int c = 0; c < l.units; ++c) {
              const int flat = lc.pool_argmax[(static_cast<std::size_t>(b) * oh * ow + o) *
                                                  static_cast<std::size_t>(l.units) +
                                              c];
              dz(flat / l.units, flat % l.units) +=
                  d_out(b, static_cast<Eigen::Index>(o) * l.units + c);
            }
          }
        }
      } else {
        for (int b = 0; b < n; ++b) {
          for (int p = 0; p < g.positions; ++p) {
            for (int c = 0; c < l.units; ++c) {
              dz(static_cast<Eigen::Index>(b) * g.positions + p, c) =
                  d_out(b, static_cast<Eigen::Index>(p) * l.units + c);
            }
          }
        }
      }
    } else {
      dz = d_out;
    }
    if (l.relu) dz = (lc.relu_mask).select(dz, 0.0);

    grads[static_cast<std::size_t>(li)] = lc.x_col.transpose() * dz;

    if (li == 0) break;
    const Eigen::MatrixXd& w_back = cfg_.backward_target_weights
                                        ? layers_[static_cast<std::size_t>(li)].target_weights()
                                        : layers_[static_cast<std::size_t>(li)].effective_weights();
    Eigen::MatrixXd dx_col = dz * w_back.transpose();

    if (l.kind == LayerSpec::Kind::conv) {
      // Scatter im2col gradients back onto the input map.
      const int k = l.kernel, kk = k * k, d = g.in.c;
      Eigen::MatrixXd d_in = Eigen::MatrixXd::Zero(n, g.in.size());
      for (int b = 0; b < n; ++b) {
        for (int p = 0; p < g.positions; ++p) {
          const Eigen::Index row = static_cast<Eigen::Index>(b) * g.positions + p;
          for (int kp = 0; kp < kk; ++kp) {
            const int src = g.gather[static_cast<std::size_t>(p) * kk + kp];
            if (src < 0) continue;
            for (int c = 0; c < d; ++c) {
              d_in(b, src * d + c) += dx_col(row, kp * d + c);
            }
          }
        }
      }
      d_out = std::move(d_in);
    } else {
      d_out = std::move(dx_col);
    }
  }
  return grads;
}

void AnalogNetwork::apply_gradients(const std::vector<Eigen::MatrixXd>& grads, double lr,
                                    Rng& rng) {
  if (grads.size() != layers_.size()) throw std::invalid_argument("apply_gradients: size mismatch");
  for (std::size_t li = 0; li < layers_.size(); ++li) {
    const Eigen::MatrixXd delta = -lr * grads[li];
    if (cfg_.mode == AnalogPathMode::ideal) {
      layers_[li].apply_update_ideal(delta);
    } else {
      Rng layer_rng = rng.split(li + 101);
      layers_[li].apply_update(delta, layer_rng);
    }
  }
}

void AnalogNetwork::calibrate(const Eigen::MatrixXd& batch) {
  if (cfg_.mode == AnalogPathMode::ideal || cfg_.quant.adc_mode == AdcMode::exact) return;
  const int n = static_cast<int>(batch.rows());

  std::vector<std::vector<double>> per_layer(layers_.size());
  Eigen::MatrixXd cur = batch;
  // Collect exact partial sums layer by layer, propagating with the exact
  // quantizer so calibration does not depend on itself.
  for (std::size_t li = 0; li < layers_.size(); ++li) {
    Eigen::MatrixXd x_col = layer_input_columns(li, cur, n);
    layers_[li].collect_calibration_samples(x_col, per_layer[li]);

    // Propagate via the effective weights without ADC truncation.
    const LayerSpec& l = spec_.layers[li];
    const ConvGeometry& g = geom_[li];
    Eigen::MatrixXd z = x_col * layers_[li].effective_weights();
    if (l.relu) z = z.cwiseMax(0.0);
    if (l.kind == LayerSpec::Kind::conv) {
      const int nc = l.units;
      if (l.pool) {
        const int oh = g.out.h, ow = g.out.w, cw = g.conv.w;
        Eigen::MatrixXd out(n, static_cast<Eigen::Index>(oh) * ow * nc);
        for (int b = 0; b < n; ++b) {
          for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
              for (int c = 0; c < nc; ++c) {
                double best = -std::numeric_limits<double>::infinity();
                for (int dy = 0; dy < 2; ++dy) {
                  for (int dx = 0; dx < 2; ++dx) {
                    best = std::max(best, z(static_cast<Eigen::Index>(b) * g.positions +
                                                (2 * oy + dy) * cw + (2 * ox + dx),
                                            c));
                  }
                }
                out(b, (static_cast<Eigen::Index>(oy) * ow + ox) * nc + c) = best;
              }
            }
          }
        }
        cur = std::move(out);
      } else {
        Eigen::MatrixXd out(n, static_cast<Eigen::Index>(g.positions) * nc);
        for (int b = 0; b < n; ++b) {
          for (int p = 0; p < g.positions; ++p) {
            for (int c = 0; c < nc; ++c) {
              out(b, static_cast<Eigen::Index>(p) * nc + c) =
                  z(static_cast<Eigen::Index>(b) * g.positions + p, c);
            }
          }
        }
        cur = std::move(out);
      }
    } else {
      cur = z;
    }
  }

  auto uniform_over = [&](const std::vector<double>& samples) {
    double lo = 0.0, hi = 0.0;
    for (double v : samples) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (hi <= lo) hi = lo + 1.0;
    return uniform_quantizer(lo, hi, cfg_.quant.adc_bits, cfg_.quant.input_bits);
  };
  auto build = [&](const std::vector<double>& samples) {
    if (cfg_.quant.adc_mode == AdcMode::uniform) return uniform_over(samples);
    try {
      return calibrate_edges(samples, cfg_.quant.adc_bits, cfg_.quant.input_bits);
    } catch (const std::runtime_error&) {
      // Heavily tied partial sums break the quantile placement; fall back
      // to uniform edges over the observed range.
      return uniform_over(samples);
    }
  };

  if (cfg_.quant.per_chip) {
    std::vector<double> all;
    for (auto& v : per_layer) all.insert(all.end(), v.begin(), v.end());
    const QuantizerConfig q = build(all);
    for (auto& layer : layers_) layer.set_quantizer(q);
  } else {
    for (std::size_t li = 0; li < layers_.size(); ++li) {
      layers_[li].set_quantizer(build(per_layer[li]));
    }
  }
}

}  // namespace memsim
