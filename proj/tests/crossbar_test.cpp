#include <doctest.h>

#include <Eigen/Dense>
#include <cstdio>
#include <filesystem>

#include "memsim/crossbar.hpp"

using namespace memsim;

namespace {

DeviceParams clean_memristor() {
  DeviceParams p = device_preset("tiox-memristor");
  p.sigma_d2d = 0.0;
  p.sigma_c2c = 0.0;
  p.stuck_prob = 0.0;
  return p;
}

// Array with hand-set device states (conductances), no programming noise.
CrossbarArray make_array(const Eigen::MatrixXd& pos, const Eigen::MatrixXd& neg, double r_line,
                         DeviceParams params = clean_memristor()) {
  params.x_min = std::min(pos.minCoeff(), neg.minCoeff());
  params.x_max = std::max(pos.maxCoeff(), neg.maxCoeff()) * 1.5 + params.x_min;
  DevicePopulation p(static_cast<int>(pos.rows()), static_cast<int>(pos.cols()));
  DevicePopulation n(static_cast<int>(pos.rows()), static_cast<int>(pos.cols()));
  for (int i = 0; i < pos.rows(); ++i) {
    for (int j = 0; j < pos.cols(); ++j) {
      p.at(i, j).x = pos(i, j);
      n.at(i, j).x = neg(i, j);
    }
  }
  WeightMapping m{0.0, 1.0, params.x_max, params.x_min};
  CrossbarConfig c;
  c.r_line = r_line;
  return CrossbarArray(std::move(p), std::move(n), params, m, c);
}

// Independent dense assembly of the wire-grid equations, solved with full
// pivoting. Node order: row nodes then column nodes, row-major.
Eigen::VectorXd dense_grid_oracle(const Eigen::MatrixXd& g, double r_line,
                                  const Eigen::VectorXd& v) {
  const int rows = static_cast<int>(g.rows());
  const int cols = static_cast<int>(g.cols());
  const int n = 2 * rows * cols;
  const double gw = 1.0 / r_line;
  auto rn = [&](int i, int j) { return i * cols + j; };
  auto cn = [&](int i, int j) { return rows * cols + i * cols + j; };

  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      // Row node: wire to the left (source at j==0), wire to the right,
      // device to the column node.
      double diag = g(i, j) + gw;  // left wire always exists
      if (j == 0) b(rn(i, j)) += gw * v(i);
      if (j > 0) a(rn(i, j), rn(i, j - 1)) -= gw;
      if (j + 1 < cols) {
        diag += gw;
        a(rn(i, j), rn(i, j + 1)) -= gw;
      }
      a(rn(i, j), cn(i, j)) -= g(i, j);
      a(rn(i, j), rn(i, j)) += diag;

      // Column node: wire up, wire down (virtual ground at the bottom).
      double cdiag = g(i, j);
      if (i > 0) {
        cdiag += gw;
        a(cn(i, j), cn(i - 1, j)) -= gw;
      }
      if (i + 1 < rows) {
        cdiag += gw;
        a(cn(i, j), cn(i + 1, j)) -= gw;
      } else {
        cdiag += gw;  // ground segment
      }
      a(cn(i, j), rn(i, j)) -= g(i, j);
      a(cn(i, j), cn(i, j)) += cdiag;
    }
  }
  const Eigen::VectorXd x = a.fullPivLu().solve(b);
  Eigen::VectorXd currents(cols);
  for (int j = 0; j < cols; ++j) currents(j) = gw * x(cn(rows - 1, j));
  return currents;
}

}  // namespace

TEST_CASE("target_state is the linear endpoint map") {
  WeightMapping m{-1.0, 1.0, 9.0, 1.0};
  CHECK(target_state(m.w_min, m) == doctest::Approx(m.s_off));
  CHECK(target_state(m.w_max, m) == doctest::Approx(m.s_on));
  CHECK(target_state(0.0, m) == doctest::Approx(0.5 * (m.s_on + m.s_off)));
  CHECK(weight_from_state(target_state(0.37, m), m) == doctest::Approx(0.37));
}

TEST_CASE("map_weights programs within one pulse quantum") {
  DeviceParams p = clean_memristor();
  p.p_max = 2000;   // fine-grained quantization
  p.a_ltp = 1e9;    // linear update for a clean bound
  p.a_ltd = 1e9;
  WeightMapping m{-1.0, 1.0, p.x_max, p.x_min};
  Rng rng(23);
  Eigen::MatrixXd w(6, 5);
  for (int i = 0; i < w.rows(); ++i) {
    for (int j = 0; j < w.cols(); ++j) w(i, j) = rng.uniform(-1.0, 1.0);
  }
  const CrossbarArray arr = map_weights(w, m, p, CrossbarConfig{}, rng);
  const Eigen::MatrixXd w_eff = read_effective_weights(arr);
  const double quantum = (m.w_max - m.w_min) / p.p_max;
  CHECK(((w_eff - w).cwiseAbs().maxCoeff()) <= quantum + 1e-12);
}

TEST_CASE("map_weights validates its range") {
  const DeviceParams p = clean_memristor();
  Rng rng(1);
  Eigen::MatrixXd w = Eigen::MatrixXd::Constant(2, 2, 2.0);
  WeightMapping m{0.0, 1.0, p.x_max, p.x_min};
  CHECK_THROWS_AS(map_weights(w, m, p, CrossbarConfig{}, rng), std::domain_error);
  WeightMapping no_zero{0.5, 1.0, p.x_max, p.x_min};
  Eigen::MatrixXd ok = Eigen::MatrixXd::Constant(2, 2, 0.75);
  CHECK_THROWS_AS(map_weights(ok, no_zero, p, CrossbarConfig{}, rng), std::domain_error);
}

TEST_CASE("fresh arrays read back as zero weights") {
  DeviceParams p = clean_memristor();
  Rng rng(2);
  const DevicePopulation pos = sample_population(p, 4, 4, rng);
  const DevicePopulation neg = sample_population(p, 4, 4, rng);
  WeightMapping m{0.0, 1.0, p.x_max, p.x_min};
  CrossbarArray arr(pos, neg, p, m, CrossbarConfig{});
  CHECK(read_effective_weights(arr).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("stuck devices pin their weight across reprogramming") {
  DeviceParams p = clean_memristor();
  Rng rng(3);
  DevicePopulation pos = sample_population(p, 1, 1, rng);
  DevicePopulation neg = sample_population(p, 1, 1, rng);
  pos.at(0, 0).stuck = true;
  pos.at(0, 0).stuck_value = p.x_min;
  WeightMapping m{0.0, 1.0, p.x_max, p.x_min};
  CrossbarArray arr(pos, neg, p, m, CrossbarConfig{});
  const double before = read_effective_weights(arr)(0, 0);
  for (double target : {1.0, 0.3, 0.9}) {
    reprogram(arr, Eigen::MatrixXd::Constant(1, 1, target), rng);
    CHECK(read_effective_weights(arr)(0, 0) == doctest::Approx(before));
  }
}

TEST_CASE("ideal_vmm computes differential column sums") {
  SUBCASE("zero input gives zero output") {
    Eigen::MatrixXd g = Eigen::MatrixXd::Constant(3, 4, 1e-5);
    const CrossbarArray arr = make_array(g, g * 0.5, 0.0);
    const Eigen::VectorXd out = ideal_vmm(arr, Eigen::VectorXd::Zero(3));
    CHECK(out.cwiseAbs().maxCoeff() == doctest::Approx(0.0));
  }

  SUBCASE("single crosspoint follows Ohm's law") {
    Eigen::MatrixXd gp = Eigen::MatrixXd::Constant(1, 1, 1e-4);
    Eigen::MatrixXd gn = Eigen::MatrixXd::Constant(1, 1, 1e-9);
    const CrossbarArray arr = make_array(gp, gn, 0.0);
    Eigen::VectorXd v(1);
    v << 0.5;
    CHECK(ideal_vmm(arr, v)(0) == doctest::Approx(0.5 * (1e-4 - 1e-9)).epsilon(1e-12));
  }

  SUBCASE("2x2 hand computation") {
    Eigen::MatrixXd gp(2, 2);
    gp << 1e-5, 2e-5, 3e-5, 4e-5;
    Eigen::MatrixXd gn = Eigen::MatrixXd::Constant(2, 2, 1e-12);
    const CrossbarArray arr = make_array(gp, gn, 0.0);
    Eigen::VectorXd v(2);
    v << 1.0, -1.0;
    const Eigen::VectorXd out = ideal_vmm(arr, v);
    CHECK(out(0) == doctest::Approx(-2e-5).epsilon(1e-6));
    CHECK(out(1) == doctest::Approx(-2e-5).epsilon(1e-6));
  }

  SUBCASE("linearity") {
    Rng rng(31);
    Eigen::MatrixXd gp(5, 3), gn(5, 3);
    for (int i = 0; i < 5; ++i) {
      for (int j = 0; j < 3; ++j) {
        gp(i, j) = rng.uniform(1e-6, 1e-4);
        gn(i, j) = rng.uniform(1e-6, 1e-4);
      }
    }
    const CrossbarArray arr = make_array(gp, gn, 0.0);
    Eigen::VectorXd u(5), v(5);
    for (int i = 0; i < 5; ++i) {
      u(i) = rng.uniform(-1.0, 1.0);
      v(i) = rng.uniform(-1.0, 1.0);
    }
    const Eigen::VectorXd lhs = ideal_vmm(arr, 0.3 * u + 1.7 * v);
    const Eigen::VectorXd rhs = 0.3 * ideal_vmm(arr, u) + 1.7 * ideal_vmm(arr, v);
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-12 * rhs.cwiseAbs().maxCoeff());
  }

  SUBCASE("dimension mismatch is rejected") {
    Eigen::MatrixXd g = Eigen::MatrixXd::Constant(3, 4, 1e-5);
    const CrossbarArray arr = make_array(g, g, 0.0);
    CHECK_THROWS_AS(ideal_vmm(arr, Eigen::VectorXd::Zero(4)), std::invalid_argument);
  }
}

TEST_CASE("parasitic_vmm matches the closed form on a single cell") {
  const double r_d = 1.0 / 2e-5;  // device resistance
  const double r = 7.0;
  Eigen::MatrixXd gp = Eigen::MatrixXd::Constant(1, 1, 1.0 / r_d);
  Eigen::MatrixXd gn = Eigen::MatrixXd::Constant(1, 1, 1e-15);
  const CrossbarArray arr = make_array(gp, gn, r);
  Eigen::VectorXd v(1);
  v << 0.8;
  // Source -> r_line -> device -> r_line -> virtual ground.
  const double expected = 0.8 / (r_d + 2.0 * r);
  CHECK(parasitic_vmm(arr, v)(0) == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("parasitic_vmm agrees with an independent dense nodal solve") {
  Rng rng(47);
  Eigen::MatrixXd gp(8, 8), gn(8, 8);
  for (int i = 0; i < 8; ++i) {
    for (int j = 0; j < 8; ++j) {
      gp(i, j) = rng.uniform(4e-8, 1e-4);
      gn(i, j) = rng.uniform(4e-8, 1e-4);
    }
  }
  const double r_line = 0.5;
  const CrossbarArray arr = make_array(gp, gn, r_line);
  Eigen::VectorXd v(8);
  for (int i = 0; i < 8; ++i) v(i) = rng.uniform(0.0, 1.0);

  const Eigen::VectorXd got = parasitic_vmm(arr, v);
  const Eigen::VectorXd want = dense_grid_oracle(gp, r_line, v) - dense_grid_oracle(gn, r_line, v);
  CHECK((got - want).cwiseAbs().maxCoeff() <= 1e-9 * want.cwiseAbs().maxCoeff());
}

TEST_CASE("parasitic_vmm converges to ideal_vmm as wires improve") {
  Rng rng(53);
  Eigen::MatrixXd gp(6, 6), gn(6, 6);
  for (int i = 0; i < 6; ++i) {
    for (int j = 0; j < 6; ++j) {
      gp(i, j) = rng.uniform(4e-8, 1e-4);
      gn(i, j) = rng.uniform(4e-8, 1e-4);
    }
  }
  Eigen::VectorXd v(6);
  for (int i = 0; i < 6; ++i) v(i) = rng.uniform(0.0, 1.0);

  const CrossbarArray degenerate = make_array(gp, gn, 0.0);
  const Eigen::VectorXd ideal = ideal_vmm(degenerate, v);
  CHECK((parasitic_vmm(degenerate, v) - ideal).cwiseAbs().maxCoeff() <=
        1e-9 * ideal.cwiseAbs().maxCoeff());

  const CrossbarArray tiny = make_array(gp, gn, 1e-6);
  CHECK((parasitic_vmm(tiny, v) - ideal).cwiseAbs().maxCoeff() <=
        1e-6 * ideal.cwiseAbs().maxCoeff());
}

TEST_CASE("wire resistance strictly attenuates nonnegative reads") {
  Rng rng(59);
  Eigen::MatrixXd gp(5, 4);
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 4; ++j) gp(i, j) = rng.uniform(1e-5, 1e-4);
  }
  Eigen::MatrixXd gn = Eigen::MatrixXd::Constant(5, 4, 1e-15);
  Eigen::VectorXd v(5);
  for (int i = 0; i < 5; ++i) v(i) = rng.uniform(0.1, 1.0);

  const Eigen::VectorXd ideal = ideal_vmm(make_array(gp, gn, 0.0), v);
  const Eigen::VectorXd drop = parasitic_vmm(make_array(gp, gn, 2.0), v);
  for (int j = 0; j < 4; ++j) CHECK(drop(j) < ideal(j));
}

TEST_CASE("grid solution satisfies Kirchhoff's current law") {
  Rng rng(61);
  const int rows = 6, cols = 5;
  Eigen::MatrixXd gp(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) gp(i, j) = rng.uniform(4e-8, 1e-4);
  }
  const double r_line = 0.5;
  const double gw = 1.0 / r_line;
  const CrossbarArray arr = make_array(gp, Eigen::MatrixXd::Constant(rows, cols, 1e-15), r_line);
  Eigen::VectorXd v(rows);
  for (int i = 0; i < rows; ++i) v(i) = rng.uniform(0.2, 1.0);

  const GridSolution sol = parasitic_grid_solution(arr, v, false);
  double total_in = 0.0;
  for (int i = 0; i < rows; ++i) total_in += gw * (v(i) - sol.row_voltage(i, 0));

  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      double r_resid = gp(i, j) * (sol.row_voltage(i, j) - sol.col_voltage(i, j));
      r_resid += j == 0 ? gw * (sol.row_voltage(i, 0) - v(i))
                        : gw * (sol.row_voltage(i, j) - sol.row_voltage(i, j - 1));
      if (j + 1 < cols) r_resid += gw * (sol.row_voltage(i, j) - sol.row_voltage(i, j + 1));
      CHECK(std::abs(r_resid) <= 1e-9 * total_in);

      double c_resid = gp(i, j) * (sol.col_voltage(i, j) - sol.row_voltage(i, j));
      if (i > 0) c_resid += gw * (sol.col_voltage(i, j) - sol.col_voltage(i - 1, j));
      c_resid += i + 1 < rows ? gw * (sol.col_voltage(i, j) - sol.col_voltage(i + 1, j))
                              : gw * sol.col_voltage(i, j);
      CHECK(std::abs(c_resid) <= 1e-9 * total_in);
    }
  }
}

TEST_CASE("parasitic_vmm rejects non-memristive arrays") {
  DeviceParams p = device_preset("si-memcapacitor");
  p.sigma_d2d = p.sigma_c2c = p.stuck_prob = 0.0;
  Rng rng(5);
  const DevicePopulation pos = sample_population(p, 2, 2, rng);
  const DevicePopulation neg = sample_population(p, 2, 2, rng);
  WeightMapping m{0.0, 1.0, p.x_max, p.x_min};
  CrossbarConfig c;
  c.r_line = 1.0;
  const CrossbarArray arr(pos, neg, p, m, c);
  CHECK_THROWS_AS(parasitic_vmm(arr, Eigen::VectorXd::Zero(2)), std::invalid_argument);
}

TEST_CASE("memcapacitive readout applies the attenuation scalar") {
  DeviceParams p = device_preset("si-memcapacitor");
  p.sigma_d2d = p.sigma_c2c = p.stuck_prob = 0.0;
  Rng rng(6);
  WeightMapping m{0.0, 1.0, p.x_max, p.x_min};
  CrossbarConfig c;
  c.memcap_attenuation = 0.8;
  Eigen::MatrixXd w = Eigen::MatrixXd::Constant(2, 2, 0.5);
  const CrossbarArray arr = map_weights(w, m, p, c, rng);
  CrossbarConfig c_ref;
  Rng rng2(6);
  const CrossbarArray ref = map_weights(w, m, p, c_ref, rng2);
  Eigen::VectorXd v(2);
  v << 1.0, 0.5;
  CHECK(ideal_vmm(arr, v)(0) == doctest::Approx(0.8 * ideal_vmm(ref, v)(0)));
}

TEST_CASE("snapshots round-trip bit-exact") {
  DeviceParams p = clean_memristor();
  p.sigma_d2d = 0.07;
  p.stuck_prob = 0.1;
  Rng rng(77);
  WeightMapping m{-1.0, 1.0, p.x_max, p.x_min};
  Eigen::MatrixXd w(5, 7);
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 7; ++j) w(i, j) = rng.uniform(-1.0, 1.0);
  }
  const CrossbarArray arr = map_weights(w, m, p, CrossbarConfig{}, rng);

  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "memsim_snapshot_test";
  fs::create_directories(dir);
  for (const std::string format : {"bin", "csv"}) {
    const std::string path = (dir / ("arr." + format)).string();
    save_snapshot(arr, path, format);
    const CrossbarArray back = load_snapshot(path);
    REQUIRE(back.rows() == arr.rows());
    REQUIRE(back.cols() == arr.cols());
    for (int i = 0; i < arr.rows(); ++i) {
      for (int j = 0; j < arr.cols(); ++j) {
        CHECK(back.pos().at(i, j).x == arr.pos().at(i, j).x);
        CHECK(back.neg().at(i, j).x == arr.neg().at(i, j).x);
        CHECK(back.pos().at(i, j).stuck == arr.pos().at(i, j).stuck);
      }
    }
    CHECK(back.params().x_min == arr.params().x_min);
    CHECK(back.mapping().w_max == arr.mapping().w_max);
  }
  fs::remove_all(dir);
}

TEST_CASE("1T1R access devices disconnect grounded rows") {
  Rng rng(67);
  const int rows = 6, cols = 4;
  Eigen::MatrixXd gp(rows, cols), gn(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      gp(i, j) = rng.uniform(1e-5, 1e-4);
      gn(i, j) = rng.uniform(1e-7, 1e-6);
    }
  }
  DeviceParams params = clean_memristor();
  params.x_min = 1e-8;
  params.x_max = 2e-4;
  auto build = [&](bool one_t_one_r) {
    DevicePopulation pos(rows, cols), neg(rows, cols);
    for (int i = 0; i < rows; ++i) {
      for (int j = 0; j < cols; ++j) {
        pos.at(i, j).x = gp(i, j);
        neg.at(i, j).x = gn(i, j);
      }
    }
    CrossbarConfig c;
    c.r_line = 2.0;
    c.one_t_one_r = one_t_one_r;
    return CrossbarArray(std::move(pos), std::move(neg), params,
                         WeightMapping{0.0, 1.0, params.x_max, params.x_min}, c);
  };

  Eigen::VectorXd v_partial(rows);
  v_partial << 0.8, 0.0, 0.5, 0.0, 0.9, 0.0;  // half the rows grounded
  const Eigen::VectorXd passive = parasitic_vmm(build(false), v_partial);
  const Eigen::VectorXd gated = parasitic_vmm(build(true), v_partial);
  // Grounded rows sink sneak current in the passive array but are removed
  // by the access devices, so the sensed currents must differ.
  CHECK((passive - gated).cwiseAbs().maxCoeff() > 1e-9 * passive.cwiseAbs().maxCoeff());

  Eigen::VectorXd v_full(rows);
  v_full << 0.8, 0.2, 0.5, 0.4, 0.9, 0.3;  // every row driven: no gating
  const Eigen::VectorXd a = parasitic_vmm(build(false), v_full);
  const Eigen::VectorXd b = parasitic_vmm(build(true), v_full);
  CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-12 * a.cwiseAbs().maxCoeff());
}
