#include <algorithm>
#include <cmath>
#include <numeric>

#include "ecgtf/classifier.hpp"
#include "ecgtf/error.hpp"
#include "ecgtf/random.hpp"
#include "network_internal.hpp"

namespace ecgtf::nn {

std::vector<double> image_to_input(const scalogram::GrayImage& image, std::size_t height, std::size_t width) {
  if (height == 0 || width == 0 || image.height % height != 0 || image.width % width != 0) {
    throw InvalidArgument("cannot area-average a " + std::to_string(image.height) + "x" +
                          std::to_string(image.width) + " image down to " + std::to_string(height) + "x" +
                          std::to_string(width));
  }
  const std::size_t fy = image.height / height;
  const std::size_t fx = image.width / width;
  const double norm = 255.0 * static_cast<double>(fy * fx);
  std::vector<double> out(height * width);
  for (std::size_t r = 0; r < height; ++r) {
    for (std::size_t c = 0; c < width; ++c) {
      double s = 0.0;
      for (std::size_t dy = 0; dy < fy; ++dy) {
        for (std::size_t dx = 0; dx < fx; ++dx) s += image.at(r * fy + dy, c * fx + dx);
      }
      out[r * width + c] = s / norm;
    }
  }
  return out;
}

Tensor make_batch(const Dataset& data, std::span<const std::size_t> indices) {
  const std::size_t plane = data.height * data.width;
  Tensor batch({indices.size(), 1, data.height, data.width});
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto& px = data.examples.at(indices[i]).pixels;
    if (px.size() != plane) throw InvalidArgument("example image size disagrees with the dataset shape");
    std::copy(px.begin(), px.end(), batch.data.begin() + static_cast<std::ptrdiff_t>(i * plane));
  }
  return batch;
}

Dataset synthetic_quadrant_dataset(std::size_t per_class, std::size_t height, std::size_t width,
                                   std::uint64_t seed) {
  Rng rng(seed);
  Dataset data;
  data.height = height;
  data.width = width;
  const double h = static_cast<double>(height);
  const double w = static_cast<double>(width);
  for (std::size_t i = 0; i < per_class; ++i) {
    for (int label = 0; label < kClassCount; ++label) {
      Example ex;
      ex.label = label;
      ex.pixels.assign(height * width, 0.0);
      if (label != static_cast<int>(Rhythm::kNoise)) {
        const double cy = (label == 2 ? 0.75 : 0.25) * h + rng.uniform(-0.08, 0.08) * h;
        const double cx = (label == 1 ? 0.75 : 0.25) * w + rng.uniform(-0.08, 0.08) * w;
        const double sigma = std::min(h, w) / 4.0 * rng.uniform(0.8, 1.2);
        const double amp = rng.uniform(0.7, 1.0);
        for (std::size_t r = 0; r < height; ++r) {
          for (std::size_t c = 0; c < width; ++c) {
            const double dy = (static_cast<double>(r) - cy) / sigma;
            const double dx = (static_cast<double>(c) - cx) / sigma;
            const double v = amp * std::exp(-0.5 * (dy * dy + dx * dx)) + 0.05 * rng.uniform();
            ex.pixels[r * width + c] = std::min(1.0, v);
          }
        }
      }
      data.examples.push_back(std::move(ex));
    }
  }
  return data;
}

namespace {

constexpr double kRunningMomentum = 0.1;

void update_running_stats(Model& model, const detail::Topology& topo, const detail::Tape& tape) {
  const auto update = [&](const detail::ConvSpec& c, const detail::NormCache& cache) {
    auto& mean = model.buffers[c.running_mean].value;
    auto& var = model.buffers[c.running_var].value;
    for (std::size_t k = 0; k < mean.size(); ++k) {
      mean[k] = (1.0 - kRunningMomentum) * mean[k] + kRunningMomentum * cache.mean[k];
      var[k] = (1.0 - kRunningMomentum) * var[k] + kRunningMomentum * cache.var[k];
    }
  };
  if (topo.stem.norm) update(topo.stem, tape.stem.norm);
  for (std::size_t i = 0; i < topo.blocks.size(); ++i) {
    const auto& b = topo.blocks[i];
    const auto& bc = tape.blocks[i];
    if (b.conv1.norm) update(b.conv1, bc.conv1.norm);
    if (b.conv2.norm) update(b.conv2, bc.conv2.norm);
    if (b.projection && b.shortcut.norm) update(b.shortcut, bc.shortcut.norm);
  }
}

void check_dataset(const Model& model, const Dataset& data) {
  if (data.examples.empty()) throw InvalidArgument("training set is empty");
  if (data.height != model.config.input_height || data.width != model.config.input_width) {
    throw InvalidArgument("dataset images are " + std::to_string(data.height) + "x" + std::to_string(data.width) +
                          " but the network expects " + std::to_string(model.config.input_height) + "x" +
                          std::to_string(model.config.input_width));
  }
  for (const auto& ex : data.examples) {
    if (ex.pixels.size() != data.height * data.width) throw InvalidArgument("dataset images differ in shape");
  }
}

}  // namespace

void train_model(Model& model, const Dataset& data, const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  check_dataset(model, data);
  const auto topo = detail::build_topology(model.config, nullptr, nullptr);

  std::vector<std::vector<double>> velocity(model.parameters.size());
  for (std::size_t i = 0; i < velocity.size(); ++i) velocity[i].assign(model.parameters[i].value.size(), 0.0);

  Rng shuffler(config.seed ^ 0x9E3779B97F4A7C15ULL);
  std::vector<std::size_t> order(data.examples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  double epoch_loss = model.metadata.final_loss;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    shuffler.shuffle(std::span<std::size_t>(order));
    double loss_sum = 0.0;
    std::size_t seen = 0;
    int batch_no = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size, ++batch_no) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const std::span<const std::size_t> idx(order.data() + start, end - start);
      const Tensor batch = make_batch(data, idx);
      std::vector<int> labels;
      for (const auto i : idx) labels.push_back(data.examples[i].label);

      detail::Tape tape;
      const Tensor logits = detail::run_forward(model, topo, batch, true, &tape);
      const double loss = cross_entropy(logits, labels);
      if (!std::isfinite(loss)) throw DivergenceError("training loss is not finite", epoch + 1, batch_no + 1);

      Tensor dlogits = softmax(logits);
      const std::size_t n = idx.size(), k = logits.dim(1);
      for (std::size_t b = 0; b < n; ++b) {
        dlogits[b * k + static_cast<std::size_t>(labels[b])] -= 1.0;
        for (std::size_t j = 0; j < k; ++j) dlogits[b * k + j] /= static_cast<double>(n);
      }
      auto grads = detail::run_backward(model, topo, tape, dlogits);
      if (config.clip_norm > 0.0) {
        double sq = 0.0;
        for (const auto& g : grads) {
          for (double v : g) sq += v * v;
        }
        const double norm = std::sqrt(sq);
        if (norm > config.clip_norm) {
          const double s = config.clip_norm / norm;
          for (auto& g : grads) {
            for (double& v : g) v *= s;
          }
        }
      }

      for (std::size_t p = 0; p < model.parameters.size(); ++p) {
        auto& w = model.parameters[p].value;
        auto& v = velocity[p];
        const auto& g = grads[p];
        for (std::size_t q = 0; q < w.size(); ++q) {
          v[q] = config.momentum * v[q] + g[q];
          w[q] -= config.learning_rate * v[q];
        }
      }
      update_running_stats(model, topo, tape);
      loss_sum += loss * static_cast<double>(n);
      seen += n;
    }
    epoch_loss = loss_sum / static_cast<double>(seen);
    if (on_epoch) on_epoch({epoch + 1, epoch_loss});
  }
  model.metadata.seed = config.seed;
  model.metadata.epochs += config.epochs;
  model.metadata.final_loss = epoch_loss;
}

Model train(const Dataset& data, const NetworkConfig& net, const TrainConfig& config, const EpochCallback& on_epoch) {
  Model model = init_model(net, config.seed);
  train_model(model, data, config, on_epoch);
  return model;
}

Rhythm predict(const Model& model, std::span<const double> input) {
  const auto& cfg = model.config;
  if (input.size() != cfg.input_height * cfg.input_width) {
    throw InvalidArgument("image has " + std::to_string(input.size()) + " pixels, network expects " +
                          std::to_string(cfg.input_height) + "x" + std::to_string(cfg.input_width));
  }
  Tensor batch({1, 1, cfg.input_height, cfg.input_width});
  std::copy(input.begin(), input.end(), batch.data.begin());
  const Tensor logits = forward(model, batch);
  return static_cast<Rhythm>(argmax(logits.data));
}

std::vector<Rhythm> predict_all(const Model& model, const Dataset& data) {
  std::vector<Rhythm> out;
  out.reserve(data.examples.size());
  for (const auto& ex : data.examples) out.push_back(predict(model, ex.pixels));
  return out;
}

double accuracy(const Model& model, const Dataset& data) {
  if (data.examples.empty()) return 0.0;
  const auto preds = predict_all(model, data);
  std::size_t hit = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (static_cast<int>(preds[i]) == data.examples[i].label) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(preds.size());
}

}  // namespace ecgtf::nn
