#include <algorithm>
#include <cmath>
#include <string>

#include "ecgtf/classifier.hpp"
#include "ecgtf/error.hpp"
#include "ecgtf/random.hpp"
#include "network_internal.hpp"

namespace ecgtf::nn {

// ---- configuration ------------------------------------------------------------------

NetworkConfig NetworkConfig::desk_default() { return {}; }

NetworkConfig NetworkConfig::tiny() {
  NetworkConfig c;
  c.stem_width = 4;
  c.stage_widths = {4, 8};
  c.blocks_per_stage = {1, 1};
  c.input_height = 8;
  c.input_width = 16;
  return c;
}

NetworkConfig NetworkConfig::resnet34() {
  NetworkConfig c;
  c.stem_width = 64;
  c.stage_widths = {64, 128, 256, 512};
  c.blocks_per_stage = {3, 4, 6, 3};
  c.normalization = true;
  return c;
}

void NetworkConfig::validate() const {
  if (class_count != static_cast<std::size_t>(kClassCount)) {
    throw InvalidArgument("network must have exactly 4 output classes, got " + std::to_string(class_count));
  }
  if (stem_width == 0) throw InvalidArgument("stem width must be positive");
  if (stage_widths.empty() || stage_widths.size() != blocks_per_stage.size()) {
    throw InvalidArgument("stage widths and blocks per stage must be nonempty and the same length");
  }
  for (std::size_t s = 0; s < stage_widths.size(); ++s) {
    if (stage_widths[s] == 0 || blocks_per_stage[s] == 0) {
      throw InvalidArgument("every stage needs a positive width and at least one block");
    }
  }
  if (input_height == 0 || input_width == 0) throw InvalidArgument("input size must be positive");
}

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw InvalidArgument("learning rate must be finite and non-negative");
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) throw InvalidArgument("momentum must lie in [0, 1)");
  if (batch_size < 1) throw InvalidArgument("batch size must be at least 1");
  if (epochs < 0) throw InvalidArgument("epoch count must be non-negative");
  if (!(clip_norm >= 0.0) || !std::isfinite(clip_norm)) {
    throw InvalidArgument("gradient clip norm must be finite and non-negative");
  }
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : parameters) n += p.value.size();
  return n;
}

// ---- topology -----------------------------------------------------------------------

namespace detail {

namespace {

ConvSpec add_conv(const std::string& prefix, std::size_t in, std::size_t out, std::size_t kernel,
                  std::size_t stride, bool norm, std::vector<Parameter>& params, std::vector<Parameter>& buffers) {
  ConvSpec c;
  c.in = in;
  c.out = out;
  c.kernel = kernel;
  c.stride = stride;
  c.pad = kernel / 2;
  c.weight = params.size();
  params.push_back({prefix + ".weight", {out, in, kernel, kernel}, {}});
  c.bias = params.size();
  params.push_back({prefix + ".bias", {out}, {}});
  c.norm = norm;
  if (norm) {
    c.gamma = params.size();
    params.push_back({prefix + ".norm.gamma", {out}, {}});
    c.beta = params.size();
    params.push_back({prefix + ".norm.beta", {out}, {}});
    c.running_mean = buffers.size();
    buffers.push_back({prefix + ".norm.running_mean", {out}, {}});
    c.running_var = buffers.size();
    buffers.push_back({prefix + ".norm.running_var", {out}, {}});
  }
  return c;
}

}  // namespace

Topology build_topology(const NetworkConfig& config, std::vector<Parameter>* params_out,
                        std::vector<Parameter>* buffers_out) {
  config.validate();
  std::vector<Parameter> params;
  std::vector<Parameter> buffers;
  Topology t;
  const bool norm = config.normalization;
  t.stem = add_conv("stem", 1, config.stem_width, 3, 1, norm, params, buffers);

  std::size_t channels = config.stem_width;
  std::size_t h = config.input_height;
  std::size_t w = config.input_width;
  for (std::size_t s = 0; s < config.stage_widths.size(); ++s) {
    const std::size_t width = config.stage_widths[s];
    for (std::size_t b = 0; b < config.blocks_per_stage[s]; ++b) {
      const std::string prefix = "stage" + std::to_string(s) + ".block" + std::to_string(b);
      const std::size_t stride = (s > 0 && b == 0) ? 2 : 1;
      BlockSpec block;
      block.conv1 = add_conv(prefix + ".conv1", channels, width, 3, stride, norm, params, buffers);
      block.conv2 = add_conv(prefix + ".conv2", width, width, 3, 1, norm, params, buffers);
      block.projection = stride != 1 || channels != width;
      if (block.projection) {
        block.shortcut = add_conv(prefix + ".shortcut", channels, width, 1, stride, norm, params, buffers);
      }
      t.blocks.push_back(block);
      channels = width;
      if (stride == 2) {
        h = (h + 1) / 2;
        w = (w + 1) / 2;
      }
    }
  }
  t.features = channels;
  t.out_height = h;
  t.out_width = w;
  t.fc_weight = params.size();
  params.push_back({"fc.weight", {config.class_count, channels}, {}});
  t.fc_bias = params.size();
  params.push_back({"fc.bias", {config.class_count}, {}});

  for (auto& p : params) p.value.assign(element_count(p.shape), 0.0);
  for (auto& b : buffers) b.value.assign(element_count(b.shape), 0.0);
  if (params_out) *params_out = std::move(params);
  if (buffers_out) *buffers_out = std::move(buffers);
  return t;
}

// ---- layers ---------------------------------------------------------------------------

std::size_t conv_out(std::size_t size, const ConvSpec& c) {
  return (size + 2 * c.pad - c.kernel) / c.stride + 1;
}

namespace {

// Output columns ox whose input column ox*stride + k - pad lies in [0, size).
std::pair<std::size_t, std::size_t> valid_range(std::size_t out_size, std::size_t in_size, std::size_t k,
                                                std::size_t pad, std::size_t stride) {
  const auto kk = static_cast<std::ptrdiff_t>(k);
  const auto p = static_cast<std::ptrdiff_t>(pad);
  const auto s = static_cast<std::ptrdiff_t>(stride);
  std::ptrdiff_t lo = p - kk > 0 ? (p - kk + s - 1) / s : 0;
  std::ptrdiff_t hi = (static_cast<std::ptrdiff_t>(in_size) - 1 + p - kk);
  hi = hi < 0 ? -1 : hi / s;
  hi = std::min<std::ptrdiff_t>(hi, static_cast<std::ptrdiff_t>(out_size) - 1);
  if (hi < lo) return {1, 0};
  return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

}  // namespace

Tensor conv_forward(const Tensor& x, const ConvSpec& c, std::span<const double> weight, std::span<const double> bias) {
  const std::size_t n = x.dim(0), in_h = x.dim(2), in_w = x.dim(3);
  const std::size_t oh = conv_out(in_h, c), ow = conv_out(in_w, c);
  Tensor y({n, c.out, oh, ow});
  const std::size_t k = c.kernel;
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t co = 0; co < c.out; ++co) {
      double* yp = &y.at(b, co, 0, 0);
      std::fill(yp, yp + oh * ow, bias[co]);
      for (std::size_t ci = 0; ci < c.in; ++ci) {
        const double* xp = &x.at(b, ci, 0, 0);
        for (std::size_t ky = 0; ky < k; ++ky) {
          const auto [oy_lo, oy_hi] = valid_range(oh, in_h, ky, c.pad, c.stride);
          for (std::size_t kx = 0; kx < k; ++kx) {
            const double wv = weight[((co * c.in + ci) * k + ky) * k + kx];
            const auto [ox_lo, ox_hi] = valid_range(ow, in_w, kx, c.pad, c.stride);
            for (std::size_t oy = oy_lo; oy <= oy_hi; ++oy) {
              const double* xrow = xp + (oy * c.stride + ky - c.pad) * in_w;
              double* yrow = yp + oy * ow;
              for (std::size_t ox = ox_lo; ox <= ox_hi; ++ox) {
                yrow[ox] += wv * xrow[ox * c.stride + kx - c.pad];
              }
            }
          }
        }
      }
    }
  }
  return y;
}

void conv_backward(const Tensor& x, const ConvSpec& c, std::span<const double> weight, const Tensor& dy, Tensor* dx,
                   std::span<double> dweight, std::span<double> dbias) {
  const std::size_t n = x.dim(0), in_h = x.dim(2), in_w = x.dim(3);
  const std::size_t oh = dy.dim(2), ow = dy.dim(3);
  const std::size_t k = c.kernel;
  if (dx) *dx = Tensor(x.shape);
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t co = 0; co < c.out; ++co) {
      const double* dyp = &dy.at(b, co, 0, 0);
      double db = 0.0;
      for (std::size_t i = 0; i < oh * ow; ++i) db += dyp[i];
      dbias[co] += db;
      for (std::size_t ci = 0; ci < c.in; ++ci) {
        const double* xp = &x.at(b, ci, 0, 0);
        double* dxp = dx ? &dx->at(b, ci, 0, 0) : nullptr;
        for (std::size_t ky = 0; ky < k; ++ky) {
          const auto [oy_lo, oy_hi] = valid_range(oh, in_h, ky, c.pad, c.stride);
          for (std::size_t kx = 0; kx < k; ++kx) {
            const std::size_t widx = ((co * c.in + ci) * k + ky) * k + kx;
            const double wv = weight[widx];
            const auto [ox_lo, ox_hi] = valid_range(ow, in_w, kx, c.pad, c.stride);
            double dw = 0.0;
            for (std::size_t oy = oy_lo; oy <= oy_hi; ++oy) {
              const std::size_t row = (oy * c.stride + ky - c.pad) * in_w;
              const double* dyrow = dyp + oy * ow;
              for (std::size_t ox = ox_lo; ox <= ox_hi; ++ox) {
                const std::size_t ix = row + ox * c.stride + kx - c.pad;
                dw += dyrow[ox] * xp[ix];
                if (dxp) dxp[ix] += wv * dyrow[ox];
              }
            }
            dweight[widx] += dw;
          }
        }
      }
    }
  }
}

namespace {
constexpr double kNormEps = 1e-5;
}

Tensor norm_forward(const Tensor& x, const ConvSpec& c, const Model& model, bool training, NormCache* cache) {
  const std::size_t n = x.dim(0), ch = x.dim(1), plane = x.dim(2) * x.dim(3);
  const auto& gamma = model.parameters[c.gamma].value;
  const auto& beta = model.parameters[c.beta].value;
  Tensor y(x.shape);
  if (cache) {
    cache->xhat = Tensor(x.shape);
    cache->inv_std.assign(ch, 0.0);
    cache->mean.assign(ch, 0.0);
    cache->var.assign(ch, 0.0);
  }
  const double count = static_cast<double>(n * plane);
  for (std::size_t cc = 0; cc < ch; ++cc) {
    double mean, var;
    if (training) {
      double s = 0.0;
      for (std::size_t b = 0; b < n; ++b) {
        const double* p = &x.at(b, cc, 0, 0);
        for (std::size_t i = 0; i < plane; ++i) s += p[i];
      }
      mean = s / count;
      double v = 0.0;
      for (std::size_t b = 0; b < n; ++b) {
        const double* p = &x.at(b, cc, 0, 0);
        for (std::size_t i = 0; i < plane; ++i) v += (p[i] - mean) * (p[i] - mean);
      }
      var = v / count;
    } else {
      mean = model.buffers[c.running_mean].value[cc];
      var = model.buffers[c.running_var].value[cc];
    }
    const double inv_std = 1.0 / std::sqrt(var + kNormEps);
    for (std::size_t b = 0; b < n; ++b) {
      const double* p = &x.at(b, cc, 0, 0);
      double* q = &y.at(b, cc, 0, 0);
      double* xh = cache ? &cache->xhat.at(b, cc, 0, 0) : nullptr;
      for (std::size_t i = 0; i < plane; ++i) {
        const double h = (p[i] - mean) * inv_std;
        if (xh) xh[i] = h;
        q[i] = gamma[cc] * h + beta[cc];
      }
    }
    if (cache) {
      cache->inv_std[cc] = inv_std;
      cache->mean[cc] = mean;
      cache->var[cc] = var;
    }
  }
  return y;
}

Tensor norm_backward(const NormCache& cache, const ConvSpec& c, const Model& model, const Tensor& dy,
                     Gradients& grads) {
  const std::size_t n = dy.dim(0), ch = dy.dim(1), plane = dy.dim(2) * dy.dim(3);
  const auto& gamma = model.parameters[c.gamma].value;
  auto& dgamma = grads[c.gamma];
  auto& dbeta = grads[c.beta];
  Tensor dx(dy.shape);
  const double count = static_cast<double>(n * plane);
  for (std::size_t cc = 0; cc < ch; ++cc) {
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (std::size_t b = 0; b < n; ++b) {
      const double* g = &dy.at(b, cc, 0, 0);
      const double* xh = &cache.xhat.at(b, cc, 0, 0);
      for (std::size_t i = 0; i < plane; ++i) {
        sum_dy += g[i];
        sum_dy_xhat += g[i] * xh[i];
      }
    }
    dgamma[cc] += sum_dy_xhat;
    dbeta[cc] += sum_dy;
    const double scale = gamma[cc] * cache.inv_std[cc] / count;
    for (std::size_t b = 0; b < n; ++b) {
      const double* g = &dy.at(b, cc, 0, 0);
      const double* xh = &cache.xhat.at(b, cc, 0, 0);
      double* d = &dx.at(b, cc, 0, 0);
      for (std::size_t i = 0; i < plane; ++i) {
        d[i] = scale * (count * g[i] - sum_dy - xh[i] * sum_dy_xhat);
      }
    }
  }
  return dx;
}

Tensor unit_forward(const Tensor& x, const ConvSpec& c, const Model& model, bool training, UnitCache* cache) {
  auto y = conv_forward(x, c, model.parameters[c.weight].value, model.parameters[c.bias].value);
  if (cache) cache->input = x;
  if (!c.norm) return y;
  return norm_forward(y, c, model, training, cache ? &cache->norm : nullptr);
}

Tensor unit_backward(const UnitCache& cache, const ConvSpec& c, const Model& model, const Tensor& dy,
                     Gradients& grads, bool need_dx) {
  const Tensor* upstream = &dy;
  Tensor dnorm;
  if (c.norm) {
    dnorm = norm_backward(cache.norm, c, model, dy, grads);
    upstream = &dnorm;
  }
  Tensor dx;
  conv_backward(cache.input, c, model.parameters[c.weight].value, *upstream, need_dx ? &dx : nullptr,
                grads[c.weight], grads[c.bias]);
  return dx;
}

void relu_inplace(Tensor& t) {
  for (auto& v : t.data) v = v > 0.0 ? v : 0.0;
}

void relu_backward_inplace(const Tensor& activated, Tensor& grad) {
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (!(activated[i] > 0.0)) grad[i] = 0.0;
  }
}

// ---- whole network ----------------------------------------------------------------------

void check_batch(const Model& model, const Tensor& batch) {
  const auto& cfg = model.config;
  if (batch.rank() != 4 || batch.dim(1) != 1 || batch.dim(2) != cfg.input_height ||
      batch.dim(3) != cfg.input_width || batch.dim(0) == 0) {
    throw InvalidArgument("batch shape " + shape_string(batch.shape) + " does not match network input [B, 1, " +
                          std::to_string(cfg.input_height) + ", " + std::to_string(cfg.input_width) + "]");
  }
}

Tensor run_forward(const Model& model, const Topology& topo, const Tensor& batch, bool training, Tape* tape) {
  check_batch(model, batch);
  if (tape) tape->blocks.resize(topo.blocks.size());

  Tensor x = unit_forward(batch, topo.stem, model, training, tape ? &tape->stem : nullptr);
  relu_inplace(x);
  if (tape) tape->stem_out = x;

  for (std::size_t i = 0; i < topo.blocks.size(); ++i) {
    const auto& spec = topo.blocks[i];
    BlockCache* bc = tape ? &tape->blocks[i] : nullptr;
    Tensor h = unit_forward(x, spec.conv1, model, training, bc ? &bc->conv1 : nullptr);
    relu_inplace(h);
    if (bc) bc->act1 = h;
    Tensor out = unit_forward(h, spec.conv2, model, training, bc ? &bc->conv2 : nullptr);
    if (spec.projection) {
      const Tensor s = unit_forward(x, spec.shortcut, model, training, bc ? &bc->shortcut : nullptr);
      for (std::size_t k = 0; k < out.size(); ++k) out[k] += s[k];
    } else {
      for (std::size_t k = 0; k < out.size(); ++k) out[k] += x[k];
    }
    relu_inplace(out);
    if (bc) bc->out = out;
    x = std::move(out);
  }

  // Global average pooling.
  const std::size_t n = x.dim(0), ch = x.dim(1), plane = x.dim(2) * x.dim(3);
  Tensor pooled({n, ch});
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t c = 0; c < ch; ++c) {
      const double* p = &x.at(b, c, 0, 0);
      double s = 0.0;
      for (std::size_t i = 0; i < plane; ++i) s += p[i];
      pooled[b * ch + c] = s / static_cast<double>(plane);
    }
  }
  if (tape) {
    tape->pooled = pooled;
    tape->last_shape = x.shape;
  }

  const auto& w = model.parameters[topo.fc_weight].value;
  const auto& bias = model.parameters[topo.fc_bias].value;
  const std::size_t classes = model.config.class_count;
  Tensor logits({n, classes});
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t k = 0; k < classes; ++k) {
      double s = bias[k];
      for (std::size_t c = 0; c < ch; ++c) s += w[k * ch + c] * pooled[b * ch + c];
      logits[b * classes + k] = s;
    }
  }
#ifndef NDEBUG
  if (!logits.all_finite()) throw Error("non-finite activation in forward pass");
#endif
  return logits;
}

Gradients run_backward(const Model& model, const Topology& topo, const Tape& tape, const Tensor& dlogits) {
  Gradients grads(model.parameters.size());
  for (std::size_t i = 0; i < grads.size(); ++i) grads[i].assign(model.parameters[i].value.size(), 0.0);

  const std::size_t n = dlogits.dim(0), classes = dlogits.dim(1);
  const std::size_t ch = topo.features;
  const auto& w = model.parameters[topo.fc_weight].value;
  auto& dw = grads[topo.fc_weight];
  auto& db = grads[topo.fc_bias];
  Tensor dpooled({n, ch});
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t k = 0; k < classes; ++k) {
      const double g = dlogits[b * classes + k];
      db[k] += g;
      for (std::size_t c = 0; c < ch; ++c) {
        dw[k * ch + c] += g * tape.pooled[b * ch + c];
        dpooled[b * ch + c] += g * w[k * ch + c];
      }
    }
  }

  Tensor dx(tape.last_shape);
  const std::size_t plane = dx.dim(2) * dx.dim(3);
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t c = 0; c < ch; ++c) {
      const double g = dpooled[b * ch + c] / static_cast<double>(plane);
      double* p = &dx.at(b, c, 0, 0);
      std::fill(p, p + plane, g);
    }
  }

  for (std::size_t i = topo.blocks.size(); i-- > 0;) {
    const auto& spec = topo.blocks[i];
    const auto& bc = tape.blocks[i];
    relu_backward_inplace(bc.out, dx);
    Tensor dh = unit_backward(bc.conv2, spec.conv2, model, dx, grads, true);
    relu_backward_inplace(bc.act1, dh);
    Tensor dinput = unit_backward(bc.conv1, spec.conv1, model, dh, grads, true);
    if (spec.projection) {
      const Tensor ds = unit_backward(bc.shortcut, spec.shortcut, model, dx, grads, true);
      for (std::size_t k = 0; k < dinput.size(); ++k) dinput[k] += ds[k];
    } else {
      for (std::size_t k = 0; k < dinput.size(); ++k) dinput[k] += dx[k];
    }
    dx = std::move(dinput);
  }

  relu_backward_inplace(tape.stem_out, dx);
  unit_backward(tape.stem, topo.stem, model, dx, grads, false);
  return grads;
}

}  // namespace detail

// ---- public API ---------------------------------------------------------------------------

Model init_model(const NetworkConfig& config, std::uint64_t seed) {
  Model model;
  model.config = config;
  const auto topo = detail::build_topology(config, &model.parameters, &model.buffers);
  Rng rng(seed);

  std::size_t total_blocks = topo.blocks.size();
  const auto fill_conv = [&](const detail::ConvSpec& c, double extra) {
    const double fan_in = static_cast<double>(c.in * c.kernel * c.kernel);
    const double bound = extra * std::sqrt(6.0 / fan_in);
    for (auto& v : model.parameters[c.weight].value) v = rng.uniform(-bound, bound);
    if (c.norm) {
      std::fill(model.parameters[c.gamma].value.begin(), model.parameters[c.gamma].value.end(), 1.0);
      std::fill(model.buffers[c.running_var].value.begin(), model.buffers[c.running_var].value.end(), 1.0);
    }
  };
  fill_conv(topo.stem, 1.0);
  // Inputs live in [0, 1]; centre each stem filter on mid-gray so a filter
  // with a negative weight sum is not dead on every image from the start.
  {
    const auto& stem = topo.stem;
    const std::size_t per_filter = stem.in * stem.kernel * stem.kernel;
    const auto& w = model.parameters[stem.weight].value;
    auto& b = model.parameters[stem.bias].value;
    for (std::size_t o = 0; o < stem.out; ++o) {
      double sum = 0.0;
      for (std::size_t i = 0; i < per_filter; ++i) sum += w[o * per_filter + i];
      b[o] = -0.5 * sum;
    }
  }
  for (const auto& b : topo.blocks) {
    fill_conv(b.conv1, 1.0);
    // Keeps the variance of the residual sum bounded as blocks accumulate.
    fill_conv(b.conv2, 1.0 / std::sqrt(static_cast<double>(total_blocks)));
    if (b.projection) fill_conv(b.shortcut, 1.0);
  }
  const double fc_bound = 1.0 / std::sqrt(static_cast<double>(topo.features));
  for (auto& v : model.parameters[topo.fc_weight].value) v = rng.uniform(-fc_bound, fc_bound);
  model.metadata.seed = seed;
  return model;
}

Tensor forward(const Model& model, const Tensor& batch) {
  const auto topo = detail::build_topology(model.config, nullptr, nullptr);
  return detail::run_forward(model, topo, batch, false, nullptr);
}

Tensor softmax(const Tensor& logits) {
  Tensor out(logits.shape);
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  for (std::size_t b = 0; b < n; ++b) {
    const double* row = &logits.data[b * k];
    const double m = *std::max_element(row, row + k);
    double z = 0.0;
    for (std::size_t j = 0; j < k; ++j) z += std::exp(row[j] - m);
    for (std::size_t j = 0; j < k; ++j) out[b * k + j] = std::exp(row[j] - m) / z;
  }
  return out;
}

namespace {

void check_labels(std::span<const int> labels, std::size_t batch, std::size_t classes) {
  if (labels.size() != batch) {
    throw InvalidArgument("got " + std::to_string(labels.size()) + " labels for a batch of " + std::to_string(batch));
  }
  for (const int l : labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= classes) {
      throw InvalidArgument("label " + std::to_string(l) + " is outside 0.." + std::to_string(classes - 1));
    }
  }
}

}  // namespace

double cross_entropy(const Tensor& logits, std::span<const int> labels) {
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  check_labels(labels, n, k);
  double total = 0.0;
  for (std::size_t b = 0; b < n; ++b) {
    const double* row = &logits.data[b * k];
    const double m = *std::max_element(row, row + k);
    double z = 0.0;
    for (std::size_t j = 0; j < k; ++j) z += std::exp(row[j] - m);
    total += std::log(z) + m - row[labels[b]];
  }
  return total / static_cast<double>(n);
}

LossAndGrad loss_and_grad(const Model& model, const Tensor& batch, std::span<const int> labels) {
  const auto topo = detail::build_topology(model.config, nullptr, nullptr);
  check_labels(labels, batch.rank() > 0 ? batch.dim(0) : 0, model.config.class_count);
  detail::Tape tape;
  const Tensor logits = detail::run_forward(model, topo, batch, true, &tape);

  LossAndGrad out;
  out.loss = cross_entropy(logits, labels);
  Tensor dlogits = softmax(logits);
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  for (std::size_t b = 0; b < n; ++b) {
    dlogits[b * k + static_cast<std::size_t>(labels[b])] -= 1.0;
    for (std::size_t j = 0; j < k; ++j) dlogits[b * k + j] /= static_cast<double>(n);
  }
  out.gradients = detail::run_backward(model, topo, tape, dlogits);
  return out;
}

int argmax(std::span<const double> logits) {
  if (logits.empty()) throw InvalidArgument("argmax of an empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < logits.size(); ++i) {
    if (logits[i] > logits[best]) best = i;
  }
  return static_cast<int>(best);
}

}  // namespace ecgtf::nn
