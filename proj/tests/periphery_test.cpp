#include <doctest.h>

#include <cmath>
#include <cstdint>

#include "memsim/periphery.hpp"
#include "memsim/rng.hpp"

using namespace memsim;

TEST_CASE("encode_input produces two's complement planes, MSB first") {
  SUBCASE("zero encodes to all-zero planes") {
    const BitSlices enc = encode_input(Eigen::VectorXd::Zero(5), 8);
    REQUIRE(enc.slices.size() == 8);
    for (const auto& s : enc.slices) CHECK(s.cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("-1 at 8 bits is 10000000") {
    Eigen::VectorXd x(1);
    x << -1.0;
    const BitSlices enc = encode_input(x, 8);
    CHECK(enc.codes(0) == -128);
    CHECK(enc.slices[0](0) == 1.0);  // sign plane
    for (int s = 1; s < 8; ++s) CHECK(enc.slices[static_cast<std::size_t>(s)](0) == 0.0);
  }

  SUBCASE("NaN is rejected") {
    Eigen::VectorXd x(1);
    x << std::nan("");
    CHECK_THROWS_AS(encode_input(x, 8), std::domain_error);
  }

  SUBCASE("decode round trip stays within one quantization step") {
    Rng rng(101);
    const int bits = 8;
    const double bound = std::ldexp(1.0, 1 - bits);
    for (int trial = 0; trial < 1000; ++trial) {
      Eigen::VectorXd x(16);
      for (int i = 0; i < 16; ++i) x(i) = rng.uniform(-1.0, 0.9999);
      const Eigen::VectorXd back = decode_input(encode_input(x, bits));
      CHECK((back - x).cwiseAbs().maxCoeff() <= bound);
    }
  }
}

TEST_CASE("adc_quantize counts edges strictly below the input") {
  const QuantizerConfig q = uniform_quantizer(0.0, 1.0, 5);

  CHECK(adc_quantize(-5.0, q) == 0);
  CHECK(adc_quantize(5.0, q) == 31);
  CHECK(adc_quantize(0.5, q) == 16);  // 0.5 / (1/32) edges below

  SUBCASE("monotone in the analog input") {
    Rng rng(7);
    for (int i = 0; i < 500; ++i) {
      const double a = rng.uniform(-0.5, 1.5);
      const double b = a + rng.uniform(0.0, 0.5);
      CHECK(adc_quantize(a, q) <= adc_quantize(b, q));
    }
  }

  SUBCASE("levels sit at bin centers in uniform mode") {
    CHECK(adc_level(16, q) == doctest::Approx((16 - 0.5) / 32.0));
  }
}

TEST_CASE("calibrate_edges places equal-probability quantiles") {
  SUBCASE("uniform samples, 1 bit: single edge at the median") {
    Rng rng(13);
    std::vector<double> samples(4096);
    for (auto& s : samples) s = rng.uniform(0.0, 1.0);
    const QuantizerConfig q = calibrate_edges(samples, 1);
    REQUIRE(q.edges.size() == 1);
    CHECK(q.edges[0] == doctest::Approx(0.5).epsilon(0.05));
  }

  SUBCASE("constant samples are degenerate") {
    std::vector<double> samples(256, 3.0);
    CHECK_THROWS(calibrate_edges(samples, 3));
  }

  SUBCASE("too few samples is an error") {
    std::vector<double> samples(7, 0.0);
    CHECK_THROWS(calibrate_edges(samples, 5));
  }

  SUBCASE("gaussian samples fill bins evenly") {
    Rng rng(17);
    const int n = 20000;
    std::vector<double> samples(n);
    for (auto& s : samples) s = rng.normal(2.0, 3.0);
    const int bits = 4;
    const QuantizerConfig q = calibrate_edges(samples, bits);

    // Fresh draws from the same distribution; multinomial 3-sigma bound per
    // bin around n/2^bits.
    std::vector<int> counts(1 << bits, 0);
    for (int i = 0; i < n; ++i) {
      counts[static_cast<std::size_t>(adc_quantize(rng.normal(2.0, 3.0), q))]++;
    }
    const double p = 1.0 / (1 << bits);
    const double sigma = std::sqrt(n * p * (1 - p));
    for (int c : counts) CHECK(std::abs(c - n * p) <= 3.0 * sigma + 1.0);
  }

  SUBCASE("levels are bin medians") {
    Rng rng(19);
    std::vector<double> samples(8192);
    for (auto& s : samples) s = rng.uniform(0.0, 1.0);
    const QuantizerConfig q = calibrate_edges(samples, 2);
    // Uniform on [0,1]: medians of the four quartile bins.
    CHECK(q.levels[0] == doctest::Approx(0.125).epsilon(0.15));
    CHECK(q.levels[3] == doctest::Approx(0.875).epsilon(0.15));
  }
}

TEST_CASE("shift_accumulate applies two's complement plane weights") {
  SUBCASE("single plane scales by the sign weight") {
    std::vector<Eigen::VectorXd> planes(1);
    planes[0] = Eigen::VectorXd::Constant(3, 1.0);
    const Eigen::VectorXd out = shift_accumulate(planes, 1);
    CHECK(out(0) == doctest::Approx(-1.0));
  }

  SUBCASE("2-bit planes [1, 1] give -1") {
    std::vector<Eigen::VectorXd> planes(2, Eigen::VectorXd::Constant(1, 1.0));
    CHECK(shift_accumulate(planes, 2)(0) == doctest::Approx(-2.0 * 1 + 1.0 * 1));
  }

  SUBCASE("plane count mismatch is rejected") {
    std::vector<Eigen::VectorXd> planes(3, Eigen::VectorXd::Constant(1, 1.0));
    CHECK_THROWS_AS(shift_accumulate(planes, 4), std::invalid_argument);
  }
}

TEST_CASE("exact pipeline equals integer dot products bit for bit") {
  Rng rng(29);
  const int bits = 8;
  const int rows = 24, cols = 7;
  for (int trial = 0; trial < 200; ++trial) {
    // Integer weights and integer inputs: every intermediate stays exactly
    // representable, so the analog pipeline with a pass-through ADC must
    // reproduce the integer arithmetic exactly.
    Eigen::MatrixXd w(rows, cols);
    for (int i = 0; i < rows; ++i) {
      for (int j = 0; j < cols; ++j) w(i, j) = std::floor(rng.uniform(-16.0, 17.0));
    }
    Eigen::VectorXd x(rows);
    for (int i = 0; i < rows; ++i) {
      x(i) = std::floor(rng.uniform(-128.0, 128.0)) / 128.0;
    }
    const BitSlices enc = encode_input(x, bits);

    std::vector<Eigen::VectorXd> partials;
    partials.reserve(static_cast<std::size_t>(bits));
    for (int s = 0; s < bits; ++s) {
      partials.push_back(w.transpose() * enc.slices[static_cast<std::size_t>(s)]);
    }
    const Eigen::VectorXd acc = shift_accumulate(partials, bits);

    for (int j = 0; j < cols; ++j) {
      std::int64_t want = 0;
      for (int i = 0; i < rows; ++i) {
        want += static_cast<std::int64_t>(enc.codes(i)) * static_cast<std::int64_t>(w(i, j));
      }
      CHECK(static_cast<std::int64_t>(acc(j)) == want);
      CHECK(acc(j) == static_cast<double>(want));  // bit-exact, not just rounded
    }
  }
}
