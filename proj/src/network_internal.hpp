#pragma once

// Layer plumbing shared by network.cpp, train.cpp and checkpoint.cpp.

#include <span>
#include <vector>

#include "ecgtf/classifier.hpp"

namespace ecgtf::nn::detail {

/// Convolution (+ optional normalization); indices point into Model::parameters / buffers.
struct ConvSpec {
  std::size_t in = 0, out = 0, kernel = 3, stride = 1, pad = 1;
  std::size_t weight = 0, bias = 0;
  bool norm = false;
  std::size_t gamma = 0, beta = 0, running_mean = 0, running_var = 0;
};

struct BlockSpec {
  ConvSpec conv1;
  ConvSpec conv2;
  bool projection = false;
  ConvSpec shortcut;
};

struct Topology {
  ConvSpec stem;
  std::vector<BlockSpec> blocks;
  std::size_t features = 0;
  std::size_t out_height = 0, out_width = 0;
  std::size_t fc_weight = 0, fc_bias = 0;
};

/// Deterministic layout for a config; optionally emits zeroed parameter and
/// buffer lists in declaration order.
Topology build_topology(const NetworkConfig& config, std::vector<Parameter>* params_out,
                        std::vector<Parameter>* buffers_out);

using Gradients = std::vector<std::vector<double>>;

struct NormCache {
  Tensor xhat;
  std::vector<double> inv_std;
  std::vector<double> mean;
  std::vector<double> var;  ///< biased batch variance
};

struct UnitCache {
  Tensor input;
  NormCache norm;
};

struct BlockCache {
  UnitCache conv1, conv2, shortcut;
  Tensor act1;
  Tensor out;
};

struct Tape {
  UnitCache stem;
  Tensor stem_out;
  std::vector<BlockCache> blocks;
  Tensor pooled;
  std::vector<std::size_t> last_shape;
};

std::size_t conv_out(std::size_t size, const ConvSpec& c);
Tensor conv_forward(const Tensor& x, const ConvSpec& c, std::span<const double> weight, std::span<const double> bias);
void conv_backward(const Tensor& x, const ConvSpec& c, std::span<const double> weight, const Tensor& dy, Tensor* dx,
                   std::span<double> dweight, std::span<double> dbias);

Tensor norm_forward(const Tensor& x, const ConvSpec& c, const Model& model, bool training, NormCache* cache);
Tensor norm_backward(const NormCache& cache, const ConvSpec& c, const Model& model, const Tensor& dy,
                     Gradients& grads);

Tensor unit_forward(const Tensor& x, const ConvSpec& c, const Model& model, bool training, UnitCache* cache);
Tensor unit_backward(const UnitCache& cache, const ConvSpec& c, const Model& model, const Tensor& dy,
                     Gradients& grads, bool need_dx);

void relu_inplace(Tensor& t);
void relu_backward_inplace(const Tensor& activated, Tensor& grad);

void check_batch(const Model& model, const Tensor& batch);

/// Logits; when `tape` is given every intermediate needed by run_backward is kept.
Tensor run_forward(const Model& model, const Topology& topo, const Tensor& batch, bool training, Tape* tape);
Gradients run_backward(const Model& model, const Topology& topo, const Tape& tape, const Tensor& dlogits);

}  // namespace ecgtf::nn::detail
