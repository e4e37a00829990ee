#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ecgtf/classifier.hpp"
#include "ecgtf/error.hpp"
#include "support.hpp"

using namespace ecgtf;
using namespace ecgtf::nn;

namespace {

// ---- naive reference network, written against the parameter naming only ----

struct Map {
  std::size_t c = 0, h = 0, w = 0;
  std::vector<double> v;
  double& at(std::size_t ci, std::size_t y, std::size_t x) { return v[(ci * h + y) * w + x]; }
  double at(std::size_t ci, std::size_t y, std::size_t x) const { return v[(ci * h + y) * w + x]; }
};

const Parameter& param(const Model& m, const std::string& name) {
  for (const auto& p : m.parameters) {
    if (p.name == name) return p;
  }
  throw std::runtime_error("no parameter " + name);
}

bool has_param(const Model& m, const std::string& name) {
  return std::any_of(m.parameters.begin(), m.parameters.end(), [&](const Parameter& p) { return p.name == name; });
}

Map conv(const Map& in, const Parameter& weight, const Parameter& bias, std::size_t stride) {
  const std::size_t out_c = weight.shape[0], k = weight.shape[2];
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(k / 2);
  Map out{out_c, (in.h + 2 * (k / 2) - k) / stride + 1, (in.w + 2 * (k / 2) - k) / stride + 1, {}};
  out.v.assign(out.c * out.h * out.w, 0.0);
  for (std::size_t o = 0; o < out_c; ++o) {
    for (std::size_t y = 0; y < out.h; ++y) {
      for (std::size_t x = 0; x < out.w; ++x) {
        double s = bias.value[o];
        for (std::size_t i = 0; i < in.c; ++i) {
          for (std::size_t dy = 0; dy < k; ++dy) {
            for (std::size_t dx = 0; dx < k; ++dx) {
              const auto iy = static_cast<std::ptrdiff_t>(y * stride + dy) - pad;
              const auto ix = static_cast<std::ptrdiff_t>(x * stride + dx) - pad;
              if (iy < 0 || ix < 0 || iy >= static_cast<std::ptrdiff_t>(in.h) ||
                  ix >= static_cast<std::ptrdiff_t>(in.w)) {
                continue;
              }
              s += weight.value[((o * in.c + i) * k + dy) * k + dx] *
                   in.at(i, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix));
            }
          }
        }
        out.at(o, y, x) = s;
      }
    }
  }
  return out;
}

void relu(Map& m) {
  for (auto& v : m.v) v = std::max(v, 0.0);
}

std::vector<double> reference_logits(const Model& m, std::span<const double> image) {
  const auto& cfg = m.config;
  Map x{1, cfg.input_height, cfg.input_width, {image.begin(), image.end()}};
  x = conv(x, param(m, "stem.weight"), param(m, "stem.bias"), 1);
  relu(x);
  for (std::size_t s = 0; s < cfg.stage_widths.size(); ++s) {
    for (std::size_t b = 0; b < cfg.blocks_per_stage[s]; ++b) {
      const std::string p = "stage" + std::to_string(s) + ".block" + std::to_string(b);
      const std::size_t stride = (s > 0 && b == 0) ? 2 : 1;
      Map h = conv(x, param(m, p + ".conv1.weight"), param(m, p + ".conv1.bias"), stride);
      relu(h);
      Map out = conv(h, param(m, p + ".conv2.weight"), param(m, p + ".conv2.bias"), 1);
      const Map skip = has_param(m, p + ".shortcut.weight")
                           ? conv(x, param(m, p + ".shortcut.weight"), param(m, p + ".shortcut.bias"), stride)
                           : x;
      for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] += skip.v[i];
      relu(out);
      x = std::move(out);
    }
  }
  const auto& w = param(m, "fc.weight");
  const auto& bias = param(m, "fc.bias");
  std::vector<double> logits(4);
  for (std::size_t k = 0; k < 4; ++k) {
    double s = bias.value[k];
    for (std::size_t c = 0; c < x.c; ++c) {
      double mean = 0.0;
      for (std::size_t i = 0; i < x.h * x.w; ++i) mean += x.v[c * x.h * x.w + i];
      s += w.value[k * x.c + c] * mean / static_cast<double>(x.h * x.w);
    }
    logits[k] = s;
  }
  return logits;
}

Tensor random_batch(Rng& rng, const NetworkConfig& cfg, std::size_t n) {
  Tensor t({n, 1, cfg.input_height, cfg.input_width});
  for (auto& v : t.data) v = rng.uniform();
  return t;
}

void randomize_biases(Model& m, Rng& rng) {
  for (auto& p : m.parameters) {
    if (p.name.ends_with(".bias")) {
      for (auto& v : p.value) v = rng.uniform(-0.1, 0.1);
    }
  }
}

}  // namespace

TEST_CASE("forward matches a naive reference network") {
  Rng rng(50);
  NetworkConfig odd;
  odd.stem_width = 3;
  odd.stage_widths = {5, 6, 2};
  odd.blocks_per_stage = {1, 2, 1};
  odd.input_height = 7;
  odd.input_width = 11;
  for (const auto& cfg : {NetworkConfig::tiny(), odd}) {
    auto model = init_model(cfg, 5);
    randomize_biases(model, rng);
    const auto batch = random_batch(rng, cfg, 3);
    const auto logits = forward(model, batch);
    REQUIRE(logits.shape == std::vector<std::size_t>{3, 4});
    const std::size_t plane = cfg.input_height * cfg.input_width;
    for (std::size_t b = 0; b < 3; ++b) {
      const auto ref = reference_logits(model, std::span(batch.data).subspan(b * plane, plane));
      for (std::size_t k = 0; k < 4; ++k) CHECK(logits[b * 4 + k] == doctest::Approx(ref[k]).epsilon(1e-12));
    }
  }
}

TEST_CASE("zero residual branch passes the activation through") {
  NetworkConfig cfg;
  cfg.stem_width = 4;
  cfg.stage_widths = {4};
  cfg.blocks_per_stage = {2};
  cfg.input_height = 6;
  cfg.input_width = 9;
  auto model = init_model(cfg, 8);
  for (auto& p : model.parameters) {
    if (p.name.starts_with("stage")) std::fill(p.value.begin(), p.value.end(), 0.0);
  }
  Rng rng(51);
  const auto batch = random_batch(rng, cfg, 1);
  Map x{1, 6, 9, batch.data};
  x = conv(x, param(model, "stem.weight"), param(model, "stem.bias"), 1);
  relu(x);
  const auto& w = param(model, "fc.weight");
  const auto logits = forward(model, batch);
  for (std::size_t k = 0; k < 4; ++k) {
    double s = 0.0;
    for (std::size_t c = 0; c < 4; ++c) {
      double mean = 0.0;
      for (std::size_t i = 0; i < 54; ++i) mean += x.v[c * 54 + i];
      s += w.value[k * 4 + c] * mean / 54.0;
    }
    CHECK(logits[k] == doctest::Approx(s).epsilon(1e-12));
  }
}

TEST_CASE("zero classifier layer gives uniform probabilities") {
  auto model = init_model(NetworkConfig::tiny(), 2);
  for (auto& p : model.parameters) {
    if (p.name.starts_with("fc.")) std::fill(p.value.begin(), p.value.end(), 0.0);
  }
  Rng rng(52);
  const auto logits = forward(model, random_batch(rng, model.config, 2));
  for (double v : logits.data) CHECK(v == 0.0);
  for (double p : softmax(logits).data) CHECK(p == 0.25);
}

TEST_CASE("samples in a batch are independent") {
  const auto model = init_model(NetworkConfig::tiny(), 3);
  Rng rng(53);
  const auto one = random_batch(rng, model.config, 1);
  Tensor two({2, 1, 8, 16});
  std::copy(one.data.begin(), one.data.end(), two.data.begin());
  std::copy(one.data.begin(), one.data.end(), two.data.begin() + 128);
  const auto a = forward(model, one), b = forward(model, two);
  for (std::size_t k = 0; k < 4; ++k) {
    CHECK(b[k] == a[k]);
    CHECK(b[4 + k] == a[k]);
  }
}

TEST_CASE("shape algebra over random configs") {
  Rng rng(54);
  for (int trial = 0; trial < 10; ++trial) {
    NetworkConfig cfg;
    cfg.stem_width = 1 + rng.below(4);
    const std::size_t stages = 1 + rng.below(3);
    cfg.stage_widths.clear();
    cfg.blocks_per_stage.clear();
    for (std::size_t s = 0; s < stages; ++s) {
      cfg.stage_widths.push_back(1 + rng.below(5));
      cfg.blocks_per_stage.push_back(1 + rng.below(2));
    }
    cfg.input_height = 1 + rng.below(12);
    cfg.input_width = 1 + rng.below(20);
    const auto model = init_model(cfg, trial);
    const std::size_t n = 1 + rng.below(3);
    CHECK(forward(model, random_batch(rng, cfg, n)).shape == std::vector<std::size_t>{n, 4});
    for (std::size_t s = 0; s < stages; ++s) {
      const std::string p = "stage" + std::to_string(s) + ".block0";
      const std::size_t in = s == 0 ? cfg.stem_width : cfg.stage_widths[s - 1];
      CHECK(param(model, p + ".conv1.weight").shape ==
            std::vector<std::size_t>{cfg.stage_widths[s], in, 3, 3});
      // stage transitions always project; the first stage only when widths differ
      CHECK(has_param(model, p + ".shortcut.weight") == (s > 0 || in != cfg.stage_widths[s]));
    }
  }
}

TEST_CASE("batch shape mismatch names the dimensions") {
  const auto model = init_model(NetworkConfig::tiny(), 1);
  try {
    forward(model, Tensor({1, 1, 8, 15}));
    FAIL("accepted a bad shape");
  } catch (const InvalidArgument& e) {
    CHECK(std::string(e.what()).find("[1, 1, 8, 15]") != std::string::npos);
  }
  CHECK_THROWS_AS(predict(model, std::vector<double>(100, 0.0)), InvalidArgument);
}

TEST_CASE("cross-entropy limits") {
  Tensor uniform({2, 4}, 0.7);
  const std::vector<int> labels = {0, 3};
  CHECK(cross_entropy(uniform, labels) == doctest::Approx(std::log(4.0)).epsilon(1e-14));
  Tensor confident({1, 4}, 0.0);
  confident[2] = 60.0;
  CHECK(cross_entropy(confident, std::vector<int>{2}) < 1e-20);
  CHECK_THROWS_AS(cross_entropy(uniform, std::vector<int>{0, 4}), InvalidArgument);
  CHECK_THROWS_AS(cross_entropy(uniform, std::vector<int>{-1, 0}), InvalidArgument);
  CHECK_THROWS_AS(cross_entropy(uniform, std::vector<int>{0}), InvalidArgument);

  const auto model = init_model(NetworkConfig::tiny(), 1);
  Rng rng(55);
  CHECK_THROWS_AS(loss_and_grad(model, random_batch(rng, model.config, 1), std::vector<int>{7}), InvalidArgument);
}

TEST_CASE("softmax rows sum to one") {
  Rng rng(56);
  for (int trial = 0; trial < 100; ++trial) {
    Tensor logits({3, 4});
    for (auto& v : logits.data) v = rng.uniform(-50.0, 50.0);
    const auto p = softmax(logits);
    for (std::size_t b = 0; b < 3; ++b) {
      double s = 0.0;
      for (std::size_t k = 0; k < 4; ++k) s += p[b * 4 + k];
      CHECK(std::abs(s - 1.0) <= 1e-12);
    }
  }
}

TEST_CASE("argmax prefers the lower index on ties") {
  CHECK(argmax(std::vector<double>{5, 1, 1, 1}) == 0);
  CHECK(argmax(std::vector<double>{1, 1, 1, 1}) == 0);
  CHECK(argmax(std::vector<double>{0, 2, 2, 1}) == 1);
  CHECK(argmax(std::vector<double>{0, 0, 0, 3}) == 3);
}

namespace {

// Central differences over every parameter; returns the worst relative error.
double gradient_check(Model model, const Tensor& batch, const std::vector<int>& labels, double floor) {
  const auto analytic = loss_and_grad(model, batch, labels).gradients;
  const double h = 1e-5;
  double worst = 0.0;
  for (std::size_t p = 0; p < model.parameters.size(); ++p) {
    for (std::size_t i = 0; i < model.parameters[p].value.size(); ++i) {
      double& w = model.parameters[p].value[i];
      const double saved = w;
      w = saved + h;
      const double up = loss_and_grad(model, batch, labels).loss;
      w = saved - h;
      const double down = loss_and_grad(model, batch, labels).loss;
      w = saved;
      const double numeric = (up - down) / (2 * h);
      worst = std::max(worst, testing::rel_err(analytic[p][i], numeric, floor));
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("gradients match central differences") {
  Rng rng(57);
  auto model = init_model(NetworkConfig::tiny(), 11);
  randomize_biases(model, rng);
  const auto batch = random_batch(rng, model.config, 2);
  CHECK(gradient_check(model, batch, {1, 3}, 1e-8) <= 1e-4);
}

TEST_CASE("gradients with batch normalization") {
  Rng rng(58);
  auto cfg = NetworkConfig::tiny();
  cfg.normalization = true;
  auto model = init_model(cfg, 12);
  randomize_biases(model, rng);
  const auto batch = random_batch(rng, cfg, 3);
  const std::vector<int> labels = {0, 2, 1};
  // a bias feeding a normalization layer has an exactly zero gradient, so the
  // numeric side is pure roundoff; compare against a wider floor
  CHECK(gradient_check(model, batch, labels, 1e-6) <= 1e-4);
  const auto grads = loss_and_grad(model, batch, labels).gradients;
  for (std::size_t p = 0; p < model.parameters.size(); ++p) {
    const auto& name = model.parameters[p].name;
    if (name.ends_with(".bias") && !name.starts_with("fc.")) {
      for (double g : grads[p]) CHECK(std::abs(g) <= 1e-12);
    }
  }
}

TEST_CASE("image to input averages blocks and rescales") {
  scalogram::GrayImage img{4, 2, {0, 255, 10, 20, 255, 0, 30, 40}};
  const auto in = image_to_input(img, 1, 2);
  REQUIRE(in.size() == 2);
  CHECK(in[0] == doctest::Approx(510.0 / 4.0 / 255.0));
  CHECK(in[1] == doctest::Approx(100.0 / 4.0 / 255.0));
  CHECK_THROWS_AS(image_to_input(img, 3, 2), InvalidArgument);
}

TEST_CASE("training is deterministic and separates the synthetic set") {
  const auto data = synthetic_quadrant_dataset(8, 8, 16, 3);
  CHECK(data.examples.size() == 32);
  TrainConfig tc;
  tc.learning_rate = 0.05;
  tc.batch_size = 8;
  tc.epochs = 40;
  tc.seed = 4;
  std::vector<double> losses;
  const auto a = train(data, NetworkConfig::tiny(), tc, [&](const EpochReport& r) { losses.push_back(r.mean_loss); });
  const auto b = train(data, NetworkConfig::tiny(), tc);
  CHECK(losses.size() == 40);
  for (std::size_t p = 0; p < a.parameters.size(); ++p) CHECK(a.parameters[p].value == b.parameters[p].value);
  CHECK(a.metadata.epochs == 40);
  CHECK(a.metadata.seed == 4);
  CHECK(a.metadata.final_loss == losses.back());
  CHECK(accuracy(a, data) >= 0.95);
  CHECK(predict(a, std::vector<double>(128, 0.0)) == Rhythm::kNoise);
}

TEST_CASE("zero learning rate leaves parameters alone") {
  const auto data = synthetic_quadrant_dataset(2, 8, 16, 5);
  TrainConfig tc;
  tc.learning_rate = 0.0;
  tc.epochs = 3;
  tc.batch_size = 3;
  const auto start = init_model(NetworkConfig::tiny(), tc.seed);
  const auto trained = train(data, NetworkConfig::tiny(), tc);
  for (std::size_t p = 0; p < start.parameters.size(); ++p) {
    CHECK(trained.parameters[p].value == start.parameters[p].value);
  }
}

TEST_CASE("divergence is reported with its position") {
  const auto data = synthetic_quadrant_dataset(4, 8, 16, 6);
  TrainConfig tc;
  tc.learning_rate = 1e300;
  tc.epochs = 20;
  tc.batch_size = 4;
  try {
    train(data, NetworkConfig::tiny(), tc);
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK(e.epoch() >= 1);
    CHECK(e.batch() >= 1);
  }
}

TEST_CASE("training preconditions") {
  Dataset empty{8, 16, {}};
  CHECK_THROWS_AS(train(empty, NetworkConfig::tiny(), {}), InvalidArgument);
  auto data = synthetic_quadrant_dataset(1, 8, 16, 1);
  data.examples[2].pixels.pop_back();
  CHECK_THROWS_AS(train(data, NetworkConfig::tiny(), {}), InvalidArgument);
  TrainConfig bad;
  bad.batch_size = 0;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  auto cfg = NetworkConfig::tiny();
  cfg.class_count = 3;
  CHECK_THROWS_AS(init_model(cfg, 1), InvalidArgument);
}

TEST_CASE("checkpoint round trip") {
  testing::TempDir dir;
  auto cfg = NetworkConfig::tiny();
  cfg.normalization = true;
  auto model = init_model(cfg, 77);
  Rng rng(59);
  for (auto& b : model.buffers) {
    for (auto& v : b.value) v = rng.uniform(0.1, 2.0);
  }
  model.metadata = {77, 12, 0.123456789012345678};
  save_model(model, dir / "m.bin");
  const auto back = load_model(dir / "m.bin");
  CHECK(back.config == model.config);
  CHECK(back.metadata.seed == 77);
  CHECK(back.metadata.epochs == 12);
  CHECK(back.metadata.final_loss == model.metadata.final_loss);
  REQUIRE(back.parameters.size() == model.parameters.size());
  for (std::size_t p = 0; p < model.parameters.size(); ++p) {
    CHECK(back.parameters[p].name == model.parameters[p].name);
    CHECK(back.parameters[p].value == model.parameters[p].value);
  }
  for (std::size_t p = 0; p < model.buffers.size(); ++p) CHECK(back.buffers[p].value == model.buffers[p].value);

  const auto bytes = testing::read_file(dir / "m.bin");
  CHECK(std::string(bytes.begin(), bytes.begin() + 8) == "ECGTFNET");
  CHECK(bytes[8] == 1);

  auto truncated = bytes;
  truncated.resize(bytes.size() - 5);
  testing::write_bytes(dir / "t.bin", truncated);
  CHECK_THROWS_AS(load_model(dir / "t.bin"), FormatError);
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  testing::write_bytes(dir / "b.bin", bad_magic);
  CHECK_THROWS_AS(load_model(dir / "b.bin"), FormatError);
  auto bad_version = bytes;
  bad_version[8] = 9;
  testing::write_bytes(dir / "v.bin", bad_version);
  CHECK_THROWS_AS(load_model(dir / "v.bin"), FormatError);
  CHECK_THROWS_AS(load_model(dir / "absent.bin"), IoError);
}

TEST_CASE("presets") {
  const auto big = NetworkConfig::resnet34();
  CHECK(big.stage_widths == std::vector<std::size_t>{64, 128, 256, 512});
  CHECK(big.blocks_per_stage == std::vector<std::size_t>{3, 4, 6, 3});
  const auto model = init_model(big, 1);
  std::size_t convs = 0;
  for (const auto& p : model.parameters) {
    if (p.name.ends_with("conv1.weight") || p.name.ends_with("conv2.weight")) ++convs;
  }
  CHECK(convs == 32);
  const auto desk = NetworkConfig::desk_default();
  CHECK(desk.stage_widths == std::vector<std::size_t>{8, 16, 32});
  CHECK(desk.input_height == 64);
  CHECK(desk.input_width == 256);
}
