#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ecgtf/ingest.hpp"
#include "ecgtf/scalogram.hpp"
#include "ecgtf/tensor.hpp"

namespace ecgtf::nn {

/// Residual CNN layout: 3x3 stem, then stages of basic residual blocks. The
/// first block of every stage after the first halves the spatial size and
/// uses a 1x1 projection shortcut; global average pooling feeds a linear
/// layer over the four rhythm classes.
struct NetworkConfig {
  std::size_t stem_width = 8;
  std::vector<std::size_t> stage_widths = {8, 16, 32};
  std::vector<std::size_t> blocks_per_stage = {2, 2, 2};
  std::size_t input_height = 64;
  std::size_t input_width = 256;
  std::size_t class_count = 4;
  bool normalization = false;  ///< batch normalization after every convolution

  static NetworkConfig desk_default();
  static NetworkConfig tiny();      ///< two blocks, 8x16 input
  static NetworkConfig resnet34();  ///< 64-128-256-512 widths, 3-4-6-3 blocks, normalization on

  void validate() const;
  bool operator==(const NetworkConfig&) const = default;
};

struct TrainConfig {
  double learning_rate = 0.01;
  double momentum = 0.9;
  std::size_t batch_size = 16;
  int epochs = 30;
  double clip_norm = 1.0;  ///< global gradient L2 norm cap per batch; 0 disables
  std::uint64_t seed = 1;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

struct Parameter {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> value;
};

struct TrainingMetadata {
  std::uint64_t seed = 0;
  int epochs = 0;
  double final_loss = 0.0;
};

struct Model {
  NetworkConfig config;
  std::vector<Parameter> parameters;  ///< declaration order
  std::vector<Parameter> buffers;     ///< normalization running statistics
  TrainingMetadata metadata;

  std::size_t parameter_count() const;
};

/// Fresh model, fan-in scaled uniform weights from the seeded generator. Stem
/// biases centre each filter on mid-gray input; every other bias starts at zero.
Model init_model(const NetworkConfig& config, std::uint64_t seed);

/// Logits [B, classes] for a batch [B, 1, H, W]. Inference mode.
Tensor forward(const Model& model, const Tensor& batch);

struct LossAndGrad {
  double loss = 0.0;
  std::vector<std::vector<double>> gradients;  ///< aligned with model.parameters
};

/// Mean softmax cross-entropy over the batch with full backpropagation.
/// Normalization layers use batch statistics (training mode); running
/// statistics are left untouched.
LossAndGrad loss_and_grad(const Model& model, const Tensor& batch, std::span<const int> labels);

/// Row-wise softmax of [B, classes] logits.
Tensor softmax(const Tensor& logits);

/// Mean cross-entropy of logits against labels.
double cross_entropy(const Tensor& logits, std::span<const int> labels);

/// Argmax; ties go to the lower class index.
int argmax(std::span<const double> logits);

// ---- data -------------------------------------------------------------------------

struct Example {
  std::vector<double> pixels;  ///< H*W values in [0, 1]
  int label = 0;
};

struct Dataset {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<Example> examples;
};

/// Area-average the image down to height x width (integer factors only),
/// then map 0..255 onto [0, 1].
std::vector<double> image_to_input(const scalogram::GrayImage& image, std::size_t height, std::size_t width);

/// Batch tensor [indices.size(), 1, H, W] from selected examples.
Tensor make_batch(const Dataset& data, std::span<const std::size_t> indices);

/// Separable four-class images: a bright Gaussian blob in the top-left,
/// top-right or bottom-left quadrant for classes 0-2 (position and width
/// jittered), all black for class 3.
Dataset synthetic_quadrant_dataset(std::size_t per_class, std::size_t height, std::size_t width,
                                   std::uint64_t seed);

// ---- training ----------------------------------------------------------------------

struct EpochReport {
  int epoch = 0;
  double mean_loss = 0.0;
};

using EpochCallback = std::function<void(const EpochReport&)>;

/// Momentum SGD, constant learning rate, reshuffled every epoch from the seed.
Model train(const Dataset& data, const NetworkConfig& net, const TrainConfig& config,
            const EpochCallback& on_epoch = {});

/// Continue training an existing model in place.
void train_model(Model& model, const Dataset& data, const TrainConfig& config, const EpochCallback& on_epoch = {});

Rhythm predict(const Model& model, std::span<const double> input);
std::vector<Rhythm> predict_all(const Model& model, const Dataset& data);
double accuracy(const Model& model, const Dataset& data);

// ---- checkpoint ---------------------------------------------------------------------

/// "ECGTFNET" magic, u32 version, u64 JSON length, JSON {config, metadata,
/// tensors}, then every parameter and buffer as little-endian float64 in
/// declaration order.
void save_model(const Model& model, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);

}  // namespace ecgtf::nn
