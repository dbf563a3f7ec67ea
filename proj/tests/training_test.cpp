#include <doctest.h>

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "memsim/training.hpp"

using namespace memsim;
namespace fs = std::filesystem;

namespace {

void write_be32(std::ofstream& f, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  f.write(reinterpret_cast<char*>(b), 4);
}

struct IdxFixture {
  fs::path dir;
  std::string images, labels;

  IdxFixture(int count, int h, int w, std::uint8_t max_label, std::uint32_t magic = 2051,
             bool truncate = false, int label_count = -1) {
    dir = fs::temp_directory_path() / ("memsim_idx_" + std::to_string(std::rand()));
    fs::create_directories(dir);
    images = (dir / "images").string();
    labels = (dir / "labels").string();
    {
      std::ofstream f(images, std::ios::binary);
      write_be32(f, magic);
      write_be32(f, static_cast<std::uint32_t>(count));
      write_be32(f, static_cast<std::uint32_t>(h));
      write_be32(f, static_cast<std::uint32_t>(w));
      const int total = truncate ? count * h * w / 2 : count * h * w;
      for (int i = 0; i < total; ++i) {
        const unsigned char px = static_cast<unsigned char>((i * 37) % 256);
        f.write(reinterpret_cast<const char*>(&px), 1);
      }
    }
    {
      std::ofstream f(labels, std::ios::binary);
      write_be32(f, 2049);
      const int n = label_count >= 0 ? label_count : count;
      write_be32(f, static_cast<std::uint32_t>(n));
      for (int i = 0; i < n; ++i) {
        const unsigned char l = static_cast<unsigned char>(i % (max_label + 1));
        f.write(reinterpret_cast<const char*>(&l), 1);
      }
    }
  }
  ~IdxFixture() {
    std::error_code ec;
    fs::remove_all(dir, ec);
  }
};

AnalogConfig quiet_analog(AnalogPathMode mode) {
  AnalogConfig cfg;
  cfg.mode = mode;
  cfg.device.sigma_d2d = 0.0;
  cfg.device.sigma_c2c = 0.0;
  cfg.device.stuck_prob = 0.0;
  cfg.quant.adc_mode = AdcMode::exact;
  return cfg;
}

// Toy dataset: class = quadrant of the brightest pixel block, separable.
Dataset toy_dataset(int n, int side, int classes, std::uint64_t seed) {
  Dataset d;
  d.count = n;
  d.height = side;
  d.width = side;
  d.channels = 1;
  d.num_classes = classes;
  d.images.assign(static_cast<std::size_t>(n) * side * side, 0.0f);
  d.labels.resize(static_cast<std::size_t>(n));
  Rng rng(seed);
  for (int i = 0; i < n; ++i) {
    const int cls = static_cast<int>(rng.uniform(0.0, classes));
    d.labels[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(cls);
    const int oy = (cls % 2) * side / 2;
    const int ox = (cls / 2 % 2) * side / 2;
    for (int y = 0; y < side / 2; ++y) {
      for (int x = 0; x < side / 2; ++x) {
        const double v = 0.6 + 0.4 * rng.uniform();
        d.images[(static_cast<std::size_t>(i) * side + oy + y) * side + ox + x] =
            static_cast<float>(v);
      }
    }
  }
  return d;
}

NetworkSpec toy_net(int side, int classes) {
  NetworkSpec net;
  net.name = "toy";
  net.input = {side, side, 1};
  net.layers = {LayerSpec::dense(16, true), LayerSpec::dense(classes)};
  return net;
}

}  // namespace

TEST_CASE("idx loader validates the format") {
  SUBCASE("valid file round-trips") {
    IdxFixture fx(10, 4, 4, 9);
    const Dataset d = load_idx_dataset(fx.images, fx.labels);
    CHECK(d.count == 10);
    CHECK(d.height == 4);
    CHECK(d.width == 4);
    CHECK(d.images.size() == 160);
    for (float px : d.images) {
      CHECK(px >= 0.0f);
      CHECK(px <= 1.0f);
    }
  }

  SUBCASE("bad magic is rejected") {
    IdxFixture fx(4, 4, 4, 9, 1234);
    CHECK_THROWS_WITH_AS(load_idx_dataset(fx.images, fx.labels),
                         doctest::Contains("magic"), std::runtime_error);
  }

  SUBCASE("truncated payload is rejected") {
    IdxFixture fx(4, 4, 4, 9, 2051, true);
    CHECK_THROWS_WITH_AS(load_idx_dataset(fx.images, fx.labels),
                         doctest::Contains("truncated"), std::runtime_error);
  }

  SUBCASE("image/label count mismatch is rejected") {
    IdxFixture fx(4, 4, 4, 9, 2051, false, 3);
    CHECK_THROWS_WITH_AS(load_idx_dataset(fx.images, fx.labels),
                         doctest::Contains("mismatch"), std::runtime_error);
  }

  SUBCASE("labels outside the class range are rejected") {
    IdxFixture fx(16, 4, 4, 11);
    CHECK_THROWS_WITH_AS(load_idx_dataset(fx.images, fx.labels),
                         doctest::Contains("label"), std::runtime_error);
  }
}

TEST_CASE("ideal conv forward matches direct convolution") {
  // 4x4 input, one 3x3 conv layer; the oracle convolves directly with
  // same-padding.
  NetworkSpec net;
  net.name = "conv-probe";
  net.input = {4, 4, 1};
  net.layers = {LayerSpec::conv(5, 3, /*pool=*/false, /*relu=*/false)};

  Rng rng(9);
  AnalogConfig cfg = quiet_analog(AnalogPathMode::ideal);
  AnalogNetwork an(net, cfg, rng);

  Eigen::MatrixXd x(1, 16);
  Rng data_rng(10);
  for (int i = 0; i < 16; ++i) x(0, i) = data_rng.uniform(-1.0, 1.0);

  const Eigen::MatrixXd out = an.forward(x);  // 1 x (4*4*5), (y,x,c)-minor
  const Eigen::MatrixXd& w = an.layers()[0].target_weights();  // (9*1) x 5, (ky,kx) blocks

  for (int y = 0; y < 4; ++y) {
    for (int xx = 0; xx < 4; ++xx) {
      for (int f = 0; f < 5; ++f) {
        double want = 0.0;
        for (int ky = 0; ky < 3; ++ky) {
          for (int kx = 0; kx < 3; ++kx) {
            const int sy = y + ky - 1, sx = xx + kx - 1;
            if (sy < 0 || sy >= 4 || sx < 0 || sx >= 4) continue;
            want += x(0, sy * 4 + sx) * w(ky * 3 + kx, f);
          }
        }
        CHECK(out(0, (y * 4 + xx) * 5 + f) == doctest::Approx(want).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("zero input with no biases gives zero logits") {
  Rng rng(21);
  AnalogConfig cfg = quiet_analog(AnalogPathMode::ideal);
  AnalogNetwork an(mnist_cnn(), cfg, rng);
  const Eigen::MatrixXd logits = an.forward(Eigen::MatrixXd::Zero(2, 28 * 28));
  CHECK(logits.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("backward matches finite differences on a toy net (ideal mode)") {
  const int side = 6, classes = 4;
  Rng rng(33);
  AnalogConfig cfg = quiet_analog(AnalogPathMode::ideal);
  AnalogNetwork an(toy_net(side, classes), cfg, rng);

  const Dataset d = toy_dataset(5, side, classes, 77);
  Eigen::MatrixXd x(5, side * side);
  std::vector<int> y;
  for (int i = 0; i < 5; ++i) {
    for (int p = 0; p < side * side; ++p) x(i, p) = d.image(i)[p];
    y.push_back(d.labels[static_cast<std::size_t>(i)]);
  }

  ForwardCache cache;
  an.forward(x, &cache);
  const std::vector<Eigen::MatrixXd> grads = an.backward(cache, y);

  auto loss_now = [&] {
    return AnalogNetwork::softmax_cross_entropy(an.forward(x), y, nullptr);
  };

  Rng pick(5);
  const double h = 1e-6;
  for (std::size_t li = 0; li < an.layers().size(); ++li) {
    Eigen::MatrixXd& w = an.layers()[li].target_weights();
    for (int probe = 0; probe < 12; ++probe) {
      const int i = static_cast<int>(pick.uniform(0.0, w.rows()));
      const int j = static_cast<int>(pick.uniform(0.0, w.cols()));
      const double keep = w(i, j);
      w(i, j) = keep + h;
      const double up = loss_now();
      w(i, j) = keep - h;
      const double dn = loss_now();
      w(i, j) = keep;
      const double fd = (up - dn) / (2.0 * h);
      const double an_grad = grads[li](i, j);
      if (std::abs(fd) > 1e-8) {
        CHECK(an_grad == doctest::Approx(fd).epsilon(1e-4));
      } else {
        CHECK(std::abs(an_grad - fd) < 1e-7);
      }
    }
  }
}

TEST_CASE("backward matches finite differences on a conv net (ideal mode)") {
  NetworkSpec net;
  net.name = "conv-fd";
  net.input = {6, 6, 1};
  net.layers = {LayerSpec::conv(3, 3, true, true), LayerSpec::dense(3)};

  Rng rng(43);
  AnalogConfig cfg = quiet_analog(AnalogPathMode::ideal);
  AnalogNetwork an(net, cfg, rng);

  Rng data_rng(44);
  Eigen::MatrixXd x(3, 36);
  for (int i = 0; i < 3; ++i) {
    for (int p = 0; p < 36; ++p) x(i, p) = data_rng.uniform(0.0, 1.0);
  }
  const std::vector<int> y{0, 2, 1};

  ForwardCache cache;
  an.forward(x, &cache);
  const std::vector<Eigen::MatrixXd> grads = an.backward(cache, y);

  auto loss_now = [&] {
    return AnalogNetwork::softmax_cross_entropy(an.forward(x), y, nullptr);
  };
  Rng pick(45);
  const double h = 1e-6;
  for (std::size_t li = 0; li < an.layers().size(); ++li) {
    Eigen::MatrixXd& w = an.layers()[li].target_weights();
    for (int probe = 0; probe < 10; ++probe) {
      const int i = static_cast<int>(pick.uniform(0.0, w.rows()));
      const int j = static_cast<int>(pick.uniform(0.0, w.cols()));
      const double keep = w(i, j);
      w(i, j) = keep + h;
      const double up = loss_now();
      w(i, j) = keep - h;
      const double dn = loss_now();
      w(i, j) = keep;
      const double fd = (up - dn) / (2.0 * h);
      if (std::abs(fd) > 1e-8) {
        CHECK(grads[li](i, j) == doctest::Approx(fd).epsilon(1e-4));
      }
    }
  }
}

TEST_CASE("zero error vector produces zero gradients") {
  // With logits forced to a one-hot-matching distribution the softmax
  // gradient vanishes; probe via a label-matching uniform case instead:
  // identical logits and uniform labels cancel in expectation. Simpler and
  // exact: all-zero inputs make every activation zero, so dW = X^T dZ = 0
  // for the first layer receiving zero input.
  Rng rng(55);
  AnalogConfig cfg = quiet_analog(AnalogPathMode::ideal);
  AnalogNetwork an(toy_net(4, 4), cfg, rng);
  ForwardCache cache;
  an.forward(Eigen::MatrixXd::Zero(4, 16), &cache);
  const std::vector<Eigen::MatrixXd> grads = an.backward(cache, {0, 1, 2, 3});
  CHECK(grads[0].cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("nonideal path with exact ADC and fine inputs approaches ideal") {
  const int side = 6, classes = 4;
  Rng rng_a(66), rng_b(66);
  AnalogConfig ideal_cfg = quiet_analog(AnalogPathMode::ideal);
  AnalogConfig exact_cfg = quiet_analog(AnalogPathMode::nonideal);
  exact_cfg.device.p_max = 4000;  // fine state quantization
  exact_cfg.device.a_ltp = exact_cfg.device.a_ltd = 1e9;
  exact_cfg.quant.input_bits = 16;

  AnalogNetwork ideal_net(toy_net(side, classes), ideal_cfg, rng_a);
  AnalogNetwork exact_net(toy_net(side, classes), exact_cfg, rng_b);

  const Dataset d = toy_dataset(8, side, classes, 99);
  Eigen::MatrixXd x(8, side * side);
  for (int i = 0; i < 8; ++i) {
    for (int p = 0; p < side * side; ++p) x(i, p) = d.image(i)[p];
  }
  const Eigen::MatrixXd a = ideal_net.forward(x);
  const Eigen::MatrixXd b = exact_net.forward(x);
  // Residual error stems from 16-bit input quantization and the p_max-step
  // weight programming; both are orders below this tolerance.
  CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-3 * std::max(1.0, a.cwiseAbs().maxCoeff()));
}

TEST_CASE("pulse programming follows the quantized-SGD oracle in lockstep") {
  const int side = 4, classes = 3;
  NetworkSpec net;
  net.name = "lockstep";
  net.input = {side, side, 1};
  net.layers = {LayerSpec::dense(classes)};

  AnalogConfig cfg = quiet_analog(AnalogPathMode::nonideal);
  // a -> infinity: at 1e12 the update curve is linear to double precision,
  // so the pulse arithmetic must track the oracle exactly.
  cfg.device.a_ltp = cfg.device.a_ltd = 1e12;
  Rng rng(77);
  AnalogNetwork an(net, cfg, rng);
  AnalogLayer& layer = an.layers()[0];
  const double step = layer.pulse_step();
  const double clip = layer.w_clip();

  // Software oracle: clamped quantized SGD with residual carry. The
  // differential pair saturates at +/- p_max pulse steps.
  const double rail = cfg.device.p_max * step;
  Eigen::MatrixXd w_oracle = layer.effective_weights();
  Eigen::MatrixXd residual = Eigen::MatrixXd::Zero(w_oracle.rows(), w_oracle.cols());

  Rng grad_rng(78);
  const double lr = 0.1;
  for (int it = 0; it < 100; ++it) {
    Eigen::MatrixXd g(w_oracle.rows(), w_oracle.cols());
    for (int i = 0; i < g.rows(); ++i) {
      for (int j = 0; j < g.cols(); ++j) g(i, j) = grad_rng.uniform(-3.0, 3.0);
    }
    Rng unused(0);
    an.apply_gradients({g}, lr, unused);

    for (int i = 0; i < g.rows(); ++i) {
      for (int j = 0; j < g.cols(); ++j) {
        const double want = -lr * g(i, j) + residual(i, j);
        int n = static_cast<int>(std::lround(want / step));
        n = std::clamp(n, -cfg.device.p_max, cfg.device.p_max);
        residual(i, j) = want - n * step;
        w_oracle(i, j) = std::clamp(w_oracle(i, j) + n * step, -rail, rail);
      }
    }
    const Eigen::MatrixXd w_dev = layer.effective_weights();
    CHECK((w_dev - w_oracle).cwiseAbs().maxCoeff() <= 1e-7 * clip);
  }
}

TEST_CASE("zero gradient programs no pulses") {
  NetworkSpec net;
  net.name = "zero-grad";
  net.input = {4, 4, 1};
  net.layers = {LayerSpec::dense(3)};
  AnalogConfig cfg = quiet_analog(AnalogPathMode::nonideal);
  Rng rng(88);
  AnalogNetwork an(net, cfg, rng);
  const Eigen::MatrixXd before = an.layers()[0].effective_weights();
  Rng unused(0);
  an.apply_gradients({Eigen::MatrixXd::Zero(16, 3)}, 0.5, unused);
  const Eigen::MatrixXd after = an.layers()[0].effective_weights();
  CHECK((before - after).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("a one-step delta moves the pair by exactly one pulse") {
  NetworkSpec net;
  net.name = "one-step";
  net.input = {1, 1, 1};
  net.layers = {LayerSpec::dense(1)};
  AnalogConfig cfg = quiet_analog(AnalogPathMode::nonideal);
  cfg.device.a_ltp = cfg.device.a_ltd = 1e9;
  Rng rng(91);
  AnalogNetwork an(net, cfg, rng);
  AnalogLayer& layer = an.layers()[0];
  const double step = layer.pulse_step();
  const double before = layer.effective_weights()(0, 0);
  Eigen::MatrixXd g = Eigen::MatrixXd::Constant(1, 1, -step);  // delta = +step at lr 1
  Rng unused(0);
  an.apply_gradients({g}, 1.0, unused);
  CHECK(layer.effective_weights()(0, 0) - before == doctest::Approx(step).epsilon(1e-9));
}

TEST_CASE("training on the toy task is deterministic and learns") {
  const int side = 6, classes = 4;
  const Dataset train = toy_dataset(600, side, classes, 123);
  const Dataset test = toy_dataset(200, side, classes, 321);

  TrainConfig tc;
  tc.lr = 0.1;
  tc.epochs = 4;
  tc.batch = 16;
  tc.seed = 7;
  tc.val_fraction = 0.1;
  tc.analog = quiet_analog(AnalogPathMode::ideal);

  const TrainResult a = run_training(toy_net(side, classes), train, test, tc);
  const TrainResult b = run_training(toy_net(side, classes), train, test, tc);
  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    CHECK(a.history[i].loss == b.history[i].loss);  // bit-exact
    CHECK(a.history[i].train_acc == b.history[i].train_acc);
    CHECK(a.history[i].val_acc == b.history[i].val_acc);
    CHECK(a.history[i].test_acc == b.history[i].test_acc);
  }
  CHECK(a.final_test_acc >= 0.9);  // separable toy task

  SUBCASE("nonideal path learns the toy task too") {
    TrainConfig nc = tc;
    nc.analog = quiet_analog(AnalogPathMode::nonideal);
    nc.analog.quant.adc_mode = AdcMode::calibrated;
    nc.epochs = 4;
    const TrainResult r = run_training(toy_net(side, classes), train, test, nc);
    CHECK(r.final_test_acc >= 0.85);
  }
}

TEST_CASE("training aborts with a diagnostic when the loss turns non-finite") {
  Dataset train = toy_dataset(64, 4, 4, 3);
  const Dataset test = toy_dataset(32, 4, 4, 3);
  train.images[3] = std::numeric_limits<float>::quiet_NaN();  // poisoned sample
  TrainConfig tc;
  tc.lr = 0.1;
  tc.epochs = 3;
  tc.batch = 64;
  tc.val_fraction = 0.0;
  tc.analog = quiet_analog(AnalogPathMode::ideal);
  CHECK_THROWS_WITH_AS(run_training(toy_net(4, 4), train, test, tc),
                       doctest::Contains("diverged"), std::runtime_error);
}

TEST_CASE("mnist smoke checks" * doctest::skip(std::getenv("MEMSIM_MNIST_DIR") == nullptr)) {
  const std::string dir = std::getenv("MEMSIM_MNIST_DIR") ? std::getenv("MEMSIM_MNIST_DIR") : "";
  const Dataset train =
      load_idx_dataset(dir + "/train-images-idx3-ubyte", dir + "/train-labels-idx1-ubyte");
  const Dataset test =
      load_idx_dataset(dir + "/t10k-images-idx3-ubyte", dir + "/t10k-labels-idx1-ubyte");
  CHECK(train.count == 60000);
  CHECK(train.height == 28);
  CHECK(test.count == 10000);

  SUBCASE("an untrained network scores near chance") {
    TrainConfig tc;
    tc.epochs = 0;
    tc.batch = 64;
    tc.seed = 3;
    tc.test_limit = 4000;
    tc.analog = quiet_analog(AnalogPathMode::ideal);
    const TrainResult r = run_training(mnist_cnn(), train, test, tc);
    CHECK(r.final_test_acc >= 0.07);
    CHECK(r.final_test_acc <= 0.13);
  }
}

TEST_CASE("larger cycle-to-cycle noise never helps on average") {
  const int side = 6, classes = 4;
  const Dataset train = toy_dataset(400, side, classes, 222);
  const Dataset test = toy_dataset(200, side, classes, 223);

  auto run_with_c2c = [&](double c2c, std::uint64_t seed) {
    TrainConfig tc;
    tc.lr = 0.1;
    tc.epochs = 3;
    tc.batch = 16;
    tc.seed = seed;
    tc.val_fraction = 0.0;
    tc.analog = quiet_analog(AnalogPathMode::nonideal);
    tc.analog.quant.adc_mode = AdcMode::calibrated;
    tc.analog.device.sigma_c2c = c2c;
    return run_training(toy_net(side, classes), train, test, tc).final_test_acc;
  };

  double small_noise = 0.0, large_noise = 0.0;
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    small_noise += run_with_c2c(0.005, seed);
    large_noise += run_with_c2c(0.20, seed);
  }
  CHECK(small_noise >= large_noise);
}
