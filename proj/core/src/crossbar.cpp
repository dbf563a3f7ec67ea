#include "memsim/crossbar.hpp"

#include <Eigen/SparseCore>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "memsim/csv.hpp"

namespace memsim {

ArrayKind array_kind_for(DeviceKind kind) {
  switch (kind) {
    case DeviceKind::memristor: return ArrayKind::memristive;
    case DeviceKind::memcapacitor: return ArrayKind::memcapacitive;
    case DeviceKind::meminductor: return ArrayKind::meminductive;
  }
  return ArrayKind::memristive;
}

void WeightMapping::validate() const {
  if (!(w_max > w_min)) throw std::invalid_argument("weight mapping: w_max > w_min required");
  if (s_on == s_off) throw std::invalid_argument("weight mapping: s_on != s_off required");
}

double target_state(double w, const WeightMapping& m) {
  m.validate();
  return (w - m.w_min) / (m.w_max - m.w_min) * (m.s_on - m.s_off) + m.s_off;
}

double weight_from_state(double s, const WeightMapping& m) {
  m.validate();
  return (s - m.s_off) / (m.s_on - m.s_off) * (m.w_max - m.w_min) + m.w_min;
}

void CrossbarConfig::validate() const {
  if (r_line < 0.0) throw std::invalid_argument("crossbar: r_line >= 0 required");
  if (!(v_read > 0.0)) throw std::invalid_argument("crossbar: v_read > 0 required");
  if (!(memcap_attenuation > 0.0) || memcap_attenuation > 1.0) {
    throw std::invalid_argument("crossbar: memcap_attenuation in (0,1]");
  }
}

CrossbarArray::CrossbarArray(DevicePopulation pos, DevicePopulation neg, DeviceParams params,
                             WeightMapping mapping, CrossbarConfig config)
    : pos_(std::move(pos)),
      neg_(std::move(neg)),
      params_(params),
      mapping_(mapping),
      config_(config) {
  if (pos_.rows() != neg_.rows() || pos_.cols() != neg_.cols()) {
    throw std::invalid_argument("crossbar: device matrices must share dimensions");
  }
  params_.validate();
  mapping_.validate();
  config_.validate();
}

Eigen::MatrixXd CrossbarArray::pos_states() const {
  Eigen::MatrixXd s(rows(), cols());
  for (int i = 0; i < rows(); ++i)
    for (int j = 0; j < cols(); ++j) s(i, j) = pos_.at(i, j).x;
  return s;
}

Eigen::MatrixXd CrossbarArray::neg_states() const {
  Eigen::MatrixXd s(rows(), cols());
  for (int i = 0; i < rows(); ++i)
    for (int j = 0; j < cols(); ++j) s(i, j) = neg_.at(i, j).x;
  return s;
}

namespace {

// Program one device from its current state toward a target state with full
// pulse granularity.
void program_device(DeviceState& cell, double target, const DeviceParams& params, Rng& rng) {
  if (cell.stuck) return;
  const double p_now = invert_curve(cell.x, PulseDirection::ltp, params, cell.a);
  const double p_target = invert_curve(target, PulseDirection::ltp, params, cell.a);
  const int n = static_cast<int>(std::lround(p_target - p_now));
  cell = apply_pulses(cell, n, params, rng);
}

}  // namespace

CrossbarArray map_weights(const Eigen::MatrixXd& w, const WeightMapping& mapping,
                          const DeviceParams& params, const CrossbarConfig& config, Rng& rng) {
  mapping.validate();
  params.validate();
  config.validate();
  if (mapping.w_min > 0.0 || mapping.w_max < 0.0) {
    throw std::domain_error("map_weights: mapping range must contain 0 (differential scheme)");
  }
  for (int i = 0; i < w.rows(); ++i) {
    for (int j = 0; j < w.cols(); ++j) {
      if (!(w(i, j) >= mapping.w_min && w(i, j) <= mapping.w_max)) {
        throw std::domain_error("map_weights: weight outside declared range");
      }
    }
  }
  const int rows = static_cast<int>(w.rows());
  const int cols = static_cast<int>(w.cols());
  DevicePopulation pos = sample_population(params, rows, cols, rng);
  DevicePopulation neg = sample_population(params, rows, cols, rng);
  CrossbarArray array(std::move(pos), std::move(neg), params, mapping, config);
  reprogram(array, w, rng);
  return array;
}

void reprogram(CrossbarArray& array, const Eigen::MatrixXd& w, Rng& rng) {
  if (w.rows() != array.rows() || w.cols() != array.cols()) {
    throw std::invalid_argument("reprogram: shape mismatch");
  }
  const WeightMapping& m = array.mapping();
  const DeviceParams& params = array.params();
  for (int i = 0; i < array.rows(); ++i) {
    for (int j = 0; j < array.cols(); ++j) {
      const double wp = std::max(w(i, j), 0.0);
      const double wn = std::max(-w(i, j), 0.0);
      program_device(array.pos().at(i, j), target_state(wp, m), params, rng);
      program_device(array.neg().at(i, j), target_state(wn, m), params, rng);
    }
  }
}

Eigen::VectorXd ideal_vmm(const CrossbarArray& array, const Eigen::VectorXd& v) {
  if (v.size() != array.rows()) throw std::invalid_argument("ideal_vmm: dimension mismatch");
  Eigen::VectorXd out = (array.pos_states() - array.neg_states()).transpose() * v;
  if (array.kind() == ArrayKind::memcapacitive) out *= array.config().memcap_attenuation;
  return out;
}

namespace {

struct GridSystem {
  Eigen::SparseMatrix<double> matrix;   // (2RC x 2RC) nodal conductance matrix
  int rows = 0, cols = 0;
  double g_wire = 0.0;

  int row_node(int i, int j) const { return i * cols + j; }
  int col_node(int i, int j) const { return rows * cols + i * cols + j; }
};

// Assemble the grid for one device polarity. zero_rows marks rows whose
// access device is off (1T1R with a 0 V input); their crosspoints vanish.
GridSystem build_grid(const Eigen::MatrixXd& g_dev, double r_line,
                      const std::vector<bool>& zero_rows) {
  GridSystem sys;
  sys.rows = static_cast<int>(g_dev.rows());
  sys.cols = static_cast<int>(g_dev.cols());
  sys.g_wire = 1.0 / r_line;
  const int n = 2 * sys.rows * sys.cols;
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(n) * 6);
  const double gw = sys.g_wire;

  // Each branch is stamped exactly once; setFromTriplets sums shares.
  auto stamp = [&](int a, int b, double g) {
    trip.emplace_back(a, a, g);
    trip.emplace_back(b, b, g);
    trip.emplace_back(a, b, -g);
    trip.emplace_back(b, a, -g);
  };
  auto stamp_to_fixed = [&](int a, double g) { trip.emplace_back(a, a, g); };

  for (int i = 0; i < sys.rows; ++i) {
    for (int j = 0; j < sys.cols; ++j) {
      double gd = g_dev(i, j);
      if (!zero_rows.empty() && zero_rows[static_cast<std::size_t>(i)]) gd = 0.0;
      stamp(sys.row_node(i, j), sys.col_node(i, j), gd);
      if (j + 1 < sys.cols) stamp(sys.row_node(i, j), sys.row_node(i, j + 1), gw);
      if (i + 1 < sys.rows) stamp(sys.col_node(i, j), sys.col_node(i + 1, j), gw);
    }
    stamp_to_fixed(sys.row_node(i, 0), gw);  // drive segment to the source
  }
  for (int j = 0; j < sys.cols; ++j) {
    stamp_to_fixed(sys.col_node(sys.rows - 1, j), gw);  // sense segment to virtual ground
  }
  sys.matrix.resize(n, n);
  sys.matrix.setFromTriplets(trip.begin(), trip.end());
  return sys;
}

Eigen::MatrixXd grid_rhs(const GridSystem& sys, const Eigen::MatrixXd& v_columns) {
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(sys.matrix.rows(), v_columns.cols());
  for (int k = 0; k < v_columns.cols(); ++k) {
    for (int i = 0; i < sys.rows; ++i) {
      rhs(sys.row_node(i, 0), k) = sys.g_wire * v_columns(i, k);
    }
  }
  return rhs;
}

Eigen::MatrixXd sensed_currents(const GridSystem& sys, const Eigen::MatrixXd& solution) {
  Eigen::MatrixXd out(sys.cols, solution.cols());
  for (int k = 0; k < solution.cols(); ++k) {
    for (int j = 0; j < sys.cols; ++j) {
      out(j, k) = sys.g_wire * solution(sys.col_node(sys.rows - 1, j), k);
    }
  }
  return out;
}

Eigen::MatrixXd solve_grid(const GridSystem& sys, const Eigen::MatrixXd& v_columns) {
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver;
  solver.compute(sys.matrix);
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error(
        "parasitic_vmm: nodal system is singular (check device states and r_line)");
  }
  Eigen::MatrixXd x = solver.solve(grid_rhs(sys, v_columns));
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("parasitic_vmm: nodal solve failed");
  }
  return sensed_currents(sys, x);
}

std::vector<bool> zero_row_mask(const CrossbarArray& array, const Eigen::VectorXd& v) {
  std::vector<bool> mask;
  if (array.config().one_t_one_r) {
    mask.resize(static_cast<std::size_t>(v.size()));
    for (int i = 0; i < v.size(); ++i) mask[static_cast<std::size_t>(i)] = v(i) == 0.0;
  }
  return mask;
}

}  // namespace

Eigen::VectorXd parasitic_vmm(const CrossbarArray& array, const Eigen::VectorXd& v) {
  if (v.size() != array.rows()) throw std::invalid_argument("parasitic_vmm: dimension mismatch");
  if (array.kind() != ArrayKind::memristive) {
    throw std::invalid_argument("parasitic_vmm: nodal grid model applies to memristive arrays");
  }
  if (array.config().r_line == 0.0) return ideal_vmm(array, v);

  const std::vector<bool> mask = zero_row_mask(array, v);
  const GridSystem pos = build_grid(array.pos_states(), array.config().r_line, mask);
  const GridSystem neg = build_grid(array.neg_states(), array.config().r_line, mask);
  return solve_grid(pos, v) - solve_grid(neg, v);
}

GridSolution parasitic_grid_solution(const CrossbarArray& array, const Eigen::VectorXd& v,
                                     bool negative_side) {
  if (v.size() != array.rows()) throw std::invalid_argument("grid solution: dimension mismatch");
  if (array.config().r_line <= 0.0) {
    throw std::invalid_argument("grid solution: requires r_line > 0");
  }
  const Eigen::MatrixXd g = negative_side ? array.neg_states() : array.pos_states();
  const GridSystem sys = build_grid(g, array.config().r_line, zero_row_mask(array, v));
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver;
  solver.compute(sys.matrix);
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("grid solution: nodal system is singular");
  }
  const Eigen::MatrixXd x = solver.solve(grid_rhs(sys, v));
  GridSolution out;
  out.row_voltage.resize(sys.rows, sys.cols);
  out.col_voltage.resize(sys.rows, sys.cols);
  for (int i = 0; i < sys.rows; ++i) {
    for (int j = 0; j < sys.cols; ++j) {
      out.row_voltage(i, j) = x(sys.row_node(i, j), 0);
      out.col_voltage(i, j) = x(sys.col_node(i, j), 0);
    }
  }
  out.column_currents = sensed_currents(sys, x).col(0);
  return out;
}

Eigen::MatrixXd read_effective_weights(const CrossbarArray& array) {
  // Offsets cancel in the differential pair; only the span rescales.
  return (array.pos_states() - array.neg_states()) / array.mapping().state_scale();
}

ParasiticSolver::ParasiticSolver(const CrossbarArray& array)
    : rows_(array.rows()), cols_(array.cols()) {
  if (array.kind() != ArrayKind::memristive) {
    throw std::invalid_argument("ParasiticSolver: memristive arrays only");
  }
  if (array.config().one_t_one_r) {
    throw std::invalid_argument("ParasiticSolver: grid depends on inputs under 1T1R");
  }
  if (array.config().r_line <= 0.0) {
    throw std::invalid_argument("ParasiticSolver: requires r_line > 0");
  }
  // I_j = gw * x[cn(rows-1, j)] and x = K^-1 P v with K symmetric, so
  // T(j, i) = gw^2 * (K^-1 e_cn(rows-1,j))[rn(i, 0)]: one solve per column.
  auto transfer = [&](const Eigen::MatrixXd& g) {
    const GridSystem sys = build_grid(g, array.config().r_line, {});
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver;
    solver.compute(sys.matrix);
    if (solver.info() != Eigen::Success) {
      throw std::runtime_error("ParasiticSolver: nodal system is singular");
    }
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(sys.matrix.rows(), cols_);
    for (int j = 0; j < cols_; ++j) rhs(sys.col_node(sys.rows - 1, j), j) = 1.0;
    const Eigen::MatrixXd y = solver.solve(rhs);
    Eigen::MatrixXd t(cols_, rows_);
    const double gw2 = sys.g_wire * sys.g_wire;
    for (int j = 0; j < cols_; ++j) {
      for (int i = 0; i < rows_; ++i) t(j, i) = gw2 * y(sys.row_node(i, 0), j);
    }
    return t;
  };
  t_diff_ = transfer(array.pos_states()) - transfer(array.neg_states());
}

Eigen::MatrixXd ParasiticSolver::solve(const Eigen::MatrixXd& v_columns) const {
  if (v_columns.rows() != rows_) throw std::invalid_argument("ParasiticSolver: dimension mismatch");
  return t_diff_ * v_columns;
}

namespace {

constexpr char kBinMagic[8] = {'M', 'E', 'M', 'X', 'B', 'A', 'R', '1'};

void write_population(std::ofstream& f, const DevicePopulation& pop) {
  for (const auto& cell : pop.cells()) {
    f.write(reinterpret_cast<const char*>(&cell.x), sizeof(double));
    f.write(reinterpret_cast<const char*>(&cell.a), sizeof(double));
    const std::uint8_t stuck = cell.stuck ? 1 : 0;
    f.write(reinterpret_cast<const char*>(&stuck), 1);
    f.write(reinterpret_cast<const char*>(&cell.stuck_value), sizeof(double));
  }
}

void read_population(std::ifstream& f, DevicePopulation& pop) {
  for (auto& cell : pop.cells()) {
    f.read(reinterpret_cast<char*>(&cell.x), sizeof(double));
    f.read(reinterpret_cast<char*>(&cell.a), sizeof(double));
    std::uint8_t stuck = 0;
    f.read(reinterpret_cast<char*>(&stuck), 1);
    cell.stuck = stuck != 0;
    f.read(reinterpret_cast<char*>(&cell.stuck_value), sizeof(double));
  }
}

}  // namespace

void save_snapshot(const CrossbarArray& array, const std::string& path,
                   const std::string& format) {
  if (format == "bin") {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f.write(kBinMagic, sizeof(kBinMagic));
    const DeviceParams& p = array.params();
    const WeightMapping& m = array.mapping();
    const CrossbarConfig& c = array.config();
    const std::int32_t kind = static_cast<std::int32_t>(p.kind);
    const std::int32_t rows = array.rows(), cols = array.cols();
    const std::int32_t p_max = p.p_max;
    const std::int32_t ot = c.one_t_one_r ? 1 : 0;
    f.write(reinterpret_cast<const char*>(&rows), 4);
    f.write(reinterpret_cast<const char*>(&cols), 4);
    f.write(reinterpret_cast<const char*>(&kind), 4);
    f.write(reinterpret_cast<const char*>(&p_max), 4);
    for (double v : {p.x_min, p.x_max, p.a_ltp, p.a_ltd, p.sigma_d2d, p.sigma_c2c, p.stuck_prob,
                     m.w_min, m.w_max, m.s_on, m.s_off, c.r_line, c.v_read, c.memcap_attenuation}) {
      f.write(reinterpret_cast<const char*>(&v), sizeof(double));
    }
    f.write(reinterpret_cast<const char*>(&ot), 4);
    write_population(f, array.pos());
    write_population(f, array.neg());
    if (!f) throw std::runtime_error("write failed: " + path);
    return;
  }
  if (format != "csv") throw std::invalid_argument("snapshot format must be csv or bin");

  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  const DeviceParams& p = array.params();
  const WeightMapping& m = array.mapping();
  const CrossbarConfig& c = array.config();
  f << "# memsim crossbar snapshot v1\n";
  f << "kind," << to_string(p.kind) << "\nrows," << array.rows() << "\ncols," << array.cols()
    << "\nx_min," << format_double(p.x_min) << "\nx_max," << format_double(p.x_max) << "\np_max,"
    << p.p_max << "\na_ltp," << format_double(p.a_ltp) << "\na_ltd," << format_double(p.a_ltd)
    << "\nsigma_d2d," << format_double(p.sigma_d2d) << "\nsigma_c2c," << format_double(p.sigma_c2c)
    << "\nstuck_prob," << format_double(p.stuck_prob) << "\nw_min," << format_double(m.w_min)
    << "\nw_max," << format_double(m.w_max) << "\ns_on," << format_double(m.s_on) << "\ns_off,"
    << format_double(m.s_off) << "\nr_line," << format_double(c.r_line) << "\nv_read,"
    << format_double(c.v_read) << "\none_t_one_r," << (c.one_t_one_r ? 1 : 0)
    << "\nmemcap_attenuation," << format_double(c.memcap_attenuation) << "\n";
  f << "row,col,pos_x,pos_a,pos_stuck,neg_x,neg_a,neg_stuck\n";
  for (int i = 0; i < array.rows(); ++i) {
    for (int j = 0; j < array.cols(); ++j) {
      const DeviceState& dp = array.pos().at(i, j);
      const DeviceState& dn = array.neg().at(i, j);
      f << i << ',' << j << ',' << format_double(dp.x) << ',' << format_double(dp.a) << ','
        << (dp.stuck ? 1 : 0) << ',' << format_double(dn.x) << ',' << format_double(dn.a) << ','
        << (dn.stuck ? 1 : 0) << '\n';
    }
  }
  if (!f) throw std::runtime_error("write failed: " + path);
}

CrossbarArray load_snapshot(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open: " + path);
  char magic[8] = {};
  f.read(magic, sizeof(magic));
  if (std::memcmp(magic, kBinMagic, sizeof(kBinMagic)) == 0) {
    std::int32_t rows = 0, cols = 0, kind = 0, p_max = 0, ot = 0;
    f.read(reinterpret_cast<char*>(&rows), 4);
    f.read(reinterpret_cast<char*>(&cols), 4);
    f.read(reinterpret_cast<char*>(&kind), 4);
    f.read(reinterpret_cast<char*>(&p_max), 4);
    double vals[14] = {};
    for (double& v : vals) f.read(reinterpret_cast<char*>(&v), sizeof(double));
    f.read(reinterpret_cast<char*>(&ot), 4);
    DeviceParams p;
    p.kind = static_cast<DeviceKind>(kind);
    p.p_max = p_max;
    p.x_min = vals[0];
    p.x_max = vals[1];
    p.a_ltp = vals[2];
    p.a_ltd = vals[3];
    p.sigma_d2d = vals[4];
    p.sigma_c2c = vals[5];
    p.stuck_prob = vals[6];
    WeightMapping m{vals[7], vals[8], vals[9], vals[10]};
    CrossbarConfig c;
    c.r_line = vals[11];
    c.v_read = vals[12];
    c.memcap_attenuation = vals[13];
    c.one_t_one_r = ot != 0;
    DevicePopulation pos(rows, cols), neg(rows, cols);
    read_population(f, pos);
    read_population(f, neg);
    if (!f) throw std::runtime_error("truncated snapshot: " + path);
    return CrossbarArray(std::move(pos), std::move(neg), p, m, c);
  }

  // Text format.
  f.seekg(0);
  std::string line;
  std::getline(f, line);
  if (line.rfind("# memsim crossbar snapshot", 0) != 0) {
    throw std::runtime_error("not a memsim snapshot: " + path);
  }
  DeviceParams p;
  WeightMapping m;
  CrossbarConfig c;
  int rows = 0, cols = 0;
  auto next_kv = [&](const std::string& key) {
    std::getline(f, line);
    const auto comma = line.find(',');
    if (comma == std::string::npos || line.substr(0, comma) != key) {
      throw std::runtime_error("snapshot parse error at key " + key);
    }
    return line.substr(comma + 1);
  };
  p.kind = device_kind_from_string(next_kv("kind"));
  rows = std::stoi(next_kv("rows"));
  cols = std::stoi(next_kv("cols"));
  p.x_min = std::stod(next_kv("x_min"));
  p.x_max = std::stod(next_kv("x_max"));
  p.p_max = std::stoi(next_kv("p_max"));
  p.a_ltp = std::stod(next_kv("a_ltp"));
  p.a_ltd = std::stod(next_kv("a_ltd"));
  p.sigma_d2d = std::stod(next_kv("sigma_d2d"));
  p.sigma_c2c = std::stod(next_kv("sigma_c2c"));
  p.stuck_prob = std::stod(next_kv("stuck_prob"));
  m.w_min = std::stod(next_kv("w_min"));
  m.w_max = std::stod(next_kv("w_max"));
  m.s_on = std::stod(next_kv("s_on"));
  m.s_off = std::stod(next_kv("s_off"));
  c.r_line = std::stod(next_kv("r_line"));
  c.v_read = std::stod(next_kv("v_read"));
  c.one_t_one_r = std::stoi(next_kv("one_t_one_r")) != 0;
  c.memcap_attenuation = std::stod(next_kv("memcap_attenuation"));
  std::getline(f, line);  // column header
  DevicePopulation pos(rows, cols), neg(rows, cols);
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string cell;
    auto next = [&] {
      if (!std::getline(ss, cell, ',')) throw std::runtime_error("snapshot row parse error");
      return cell;
    };
    const int i = std::stoi(next());
    const int j = std::stoi(next());
    DeviceState& dp = pos.at(i, j);
    dp.x = std::stod(next());
    dp.a = std::stod(next());
    dp.stuck = std::stoi(next()) != 0;
    dp.stuck_value = p.x_min;
    DeviceState& dn = neg.at(i, j);
    dn.x = std::stod(next());
    dn.a = std::stod(next());
    dn.stuck = std::stoi(next()) != 0;
    dn.stuck_value = p.x_min;
  }
  return CrossbarArray(std::move(pos), std::move(neg), p, m, c);
}

}  // namespace memsim
