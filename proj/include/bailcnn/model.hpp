#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "bailcnn/errors.hpp"
#include "bailcnn/layers.hpp"
#include "bailcnn/rng.hpp"
#include "bailcnn/tensor.hpp"

namespace bailcnn {

/// The fixed architecture: embedding -> two conv/relu/pool/dropout stages
/// -> flatten -> dense(128)+relu -> dropout -> dense(64)+relu ->
/// dense(1)+sigmoid. Filter counts, kernel size and dropout rate follow
/// the published stack; embedding width and pool size are the documented
/// defaults.
struct ModelConfig {
  size_t vocab_size = 0;
  size_t embed_dim = 128;
  size_t conv1_filters = 128;
  size_t conv2_filters = 256;
  size_t kernel_size = 5;
  size_t pool_size = 2;
  double dropout_rate = 0.3;
  size_t dense1_units = 128;
  size_t dense2_units = 64;
  size_t output_units = 1;
  size_t max_len = 0;

  size_t conv1_out_len() const { return max_len - kernel_size + 1; }
  size_t pool1_out_len() const { return conv1_out_len() / pool_size; }
  size_t conv2_out_len() const { return pool1_out_len() - kernel_size + 1; }
  size_t pool2_out_len() const { return conv2_out_len() / pool_size; }
  size_t flatten_dim() const { return pool2_out_len() * conv2_filters; }

  void validate() const {
    if (vocab_size == 0) throw ConfigError("model: vocab_size must be > 0");
    if (embed_dim == 0) throw ConfigError("model: embed_dim must be > 0");
    if (pool_size == 0) throw ConfigError("model: pool_size must be > 0");
    if (output_units != 1) {
      throw ConfigError("model: binary head requires output_units == 1");
    }
    if (dropout_rate < 0.0 || dropout_rate >= 1.0) {
      throw ConfigError("model: dropout_rate must be in [0, 1)");
    }
    if (max_len < kernel_size || conv1_out_len() < pool_size ||
        pool1_out_len() < kernel_size || conv2_out_len() < pool_size ||
        pool2_out_len() < 1) {
      throw ConfigError(
          "model: max_len " + std::to_string(max_len) +
          " leaves no spatial positions after the conv/pool stack "
          "(need max_len >= " +
          std::to_string(min_max_len(kernel_size, pool_size)) + ")");
    }
  }

  /// Smallest max_len that leaves a nonempty pooled feature map.
  static size_t min_max_len(size_t kernel, size_t pool) {
    // Invert the stack: pool2 >= 1 -> conv2 >= pool -> pool1 >= kernel-1+pool
    // -> conv1 >= pool*(kernel-1+pool) -> max_len adds kernel-1 again.
    const size_t need_pool1 = kernel - 1 + pool;
    return pool * need_pool1 + kernel - 1;
  }
};

/// Every trainable tensor, addressable by name for init, Adam, gradient
/// checks and checkpoints.
template <typename T>
struct Parameters {
  Tensor<T> embedding;
  Tensor<T> conv1_kernel, conv1_bias;
  Tensor<T> conv2_kernel, conv2_bias;
  Tensor<T> dense1_weight, dense1_bias;
  Tensor<T> dense2_weight, dense2_bias;
  Tensor<T> out_weight, out_bias;

  static Parameters zeros(const ModelConfig& c) {
    Parameters p;
    p.embedding = Tensor<T>({c.vocab_size, c.embed_dim});
    p.conv1_kernel = Tensor<T>({c.kernel_size, c.embed_dim, c.conv1_filters});
    p.conv1_bias = Tensor<T>({c.conv1_filters});
    p.conv2_kernel =
        Tensor<T>({c.kernel_size, c.conv1_filters, c.conv2_filters});
    p.conv2_bias = Tensor<T>({c.conv2_filters});
    p.dense1_weight = Tensor<T>({c.flatten_dim(), c.dense1_units});
    p.dense1_bias = Tensor<T>({c.dense1_units});
    p.dense2_weight = Tensor<T>({c.dense1_units, c.dense2_units});
    p.dense2_bias = Tensor<T>({c.dense2_units});
    p.out_weight = Tensor<T>({c.dense2_units, c.output_units});
    p.out_bias = Tensor<T>({c.output_units});
    return p;
  }

  template <typename Fn>
  void for_each(Fn&& fn) {
    fn("embedding", embedding);
    fn("conv1_kernel", conv1_kernel);
    fn("conv1_bias", conv1_bias);
    fn("conv2_kernel", conv2_kernel);
    fn("conv2_bias", conv2_bias);
    fn("dense1_weight", dense1_weight);
    fn("dense1_bias", dense1_bias);
    fn("dense2_weight", dense2_weight);
    fn("dense2_bias", dense2_bias);
    fn("out_weight", out_weight);
    fn("out_bias", out_bias);
  }

  template <typename Fn>
  void for_each(Fn&& fn) const {
    const_cast<Parameters*>(this)->for_each(
        [&](const char* name, const Tensor<T>& t) { fn(name, t); });
  }

  template <typename U>
  Parameters<U> cast() const {
    Parameters<U> out;
    out.embedding = embedding.template cast<U>();
    out.conv1_kernel = conv1_kernel.template cast<U>();
    out.conv1_bias = conv1_bias.template cast<U>();
    out.conv2_kernel = conv2_kernel.template cast<U>();
    out.conv2_bias = conv2_bias.template cast<U>();
    out.dense1_weight = dense1_weight.template cast<U>();
    out.dense1_bias = dense1_bias.template cast<U>();
    out.dense2_weight = dense2_weight.template cast<U>();
    out.dense2_bias = dense2_bias.template cast<U>();
    out.out_weight = out_weight.template cast<U>();
    out.out_bias = out_bias.template cast<U>();
    return out;
  }
};

namespace detail {

template <typename T>
void glorot_uniform(Tensor<T>& w, size_t fan_in, size_t fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (auto& v : w.data) {
    v = static_cast<T>(rng.next_uniform(-bound, bound));
  }
}

}  // namespace detail

/// Glorot-uniform weights, zero biases, embedding ~ U(-0.05, 0.05).
/// Conv fans count the receptive field (k * channels). Deterministic per
/// seed: draws always happen in the same tensor and element order.
template <typename T>
Parameters<T> init_params(const ModelConfig& config, uint64_t seed) {
  config.validate();
  Parameters<T> p = Parameters<T>::zeros(config);
  Rng rng = Rng::derive(seed, RngStream::kInit);

  for (auto& v : p.embedding.data) {
    v = static_cast<T>(rng.next_uniform(-0.05, 0.05));
  }
  detail::glorot_uniform(p.conv1_kernel,
                         config.kernel_size * config.embed_dim,
                         config.kernel_size * config.conv1_filters, rng);
  detail::glorot_uniform(p.conv2_kernel,
                         config.kernel_size * config.conv1_filters,
                         config.kernel_size * config.conv2_filters, rng);
  detail::glorot_uniform(p.dense1_weight, config.flatten_dim(),
                         config.dense1_units, rng);
  detail::glorot_uniform(p.dense2_weight, config.dense1_units,
                         config.dense2_units, rng);
  detail::glorot_uniform(p.out_weight, config.dense2_units,
                         config.output_units, rng);
  return p;
}

/// Intermediate activations and dropout masks kept for the backward pass.
template <typename T>
struct ForwardCache {
  size_t batch = 0;
  std::vector<int32_t> ids;
  Tensor<T> embedded;
  Tensor<T> conv1_pre;
  std::vector<uint32_t> pool1_argmax;
  std::vector<T> drop1_mask;
  Tensor<T> stage1_out;  // dropout(pool(relu(conv1))), conv2's input
  Tensor<T> conv2_pre;
  std::vector<uint32_t> pool2_argmax;
  std::vector<T> drop2_mask;
  Tensor<T> stage2_out;  // flattened dense1 input
  Tensor<T> dense1_pre;
  std::vector<T> drop3_mask;
  Tensor<T> dense1_out;
  Tensor<T> dense2_pre;
  Tensor<T> dense2_out;
  std::vector<T> logits;
  std::vector<T> probs;
};

/// Runs the full stack. In train mode dropout masks come from
/// `dropout_rng` and are kept in the cache so the backward pass reuses
/// them; eval mode is deterministic and mask-free.
template <typename T>
const std::vector<T>& model_forward(const ModelConfig& config,
                                    const Parameters<T>& params,
                                    const int32_t* ids, size_t batch,
                                    Mode mode, Rng* dropout_rng,
                                    ForwardCache<T>& cache) {
  if (mode == Mode::kTrain && dropout_rng == nullptr &&
      config.dropout_rate > 0.0) {
    throw ConfigError("model_forward: train mode needs a dropout rng");
  }
  Rng unused(0);
  Rng& rng = dropout_rng ? *dropout_rng : unused;

  cache.batch = batch;
  cache.ids.assign(ids, ids + batch * config.max_len);
  cache.embedded = embed_forward(ids, batch, config.max_len, params.embedding);

  cache.conv1_pre =
      conv1d_forward(cache.embedded, params.conv1_kernel, params.conv1_bias);
  Tensor<T> act = relu(cache.conv1_pre);
  act = maxpool1d(act, config.pool_size, &cache.pool1_argmax);
  cache.stage1_out =
      dropout(act, config.dropout_rate, mode, rng, &cache.drop1_mask);

  cache.conv2_pre =
      conv1d_forward(cache.stage1_out, params.conv2_kernel, params.conv2_bias);
  act = relu(cache.conv2_pre);
  act = maxpool1d(act, config.pool_size, &cache.pool2_argmax);
  act = dropout(act, config.dropout_rate, mode, rng, &cache.drop2_mask);
  cache.stage2_out = flatten(act);

  cache.dense1_pre =
      dense_forward(cache.stage2_out, params.dense1_weight, params.dense1_bias);
  cache.dense1_out = dropout(relu(cache.dense1_pre), config.dropout_rate,
                             mode, rng, &cache.drop3_mask);

  cache.dense2_pre =
      dense_forward(cache.dense1_out, params.dense2_weight, params.dense2_bias);
  cache.dense2_out = relu(cache.dense2_pre);

  Tensor<T> z =
      dense_forward(cache.dense2_out, params.out_weight, params.out_bias);
  cache.logits.assign(z.data.begin(), z.data.end());
  cache.probs.resize(batch);
  for (size_t b = 0; b < batch; ++b) cache.probs[b] = sigmoid(cache.logits[b]);
  return cache.probs;
}

/// Gradients of mean BCE over the cached batch with respect to every
/// parameter tensor. Dropout masks recorded in the forward pass are
/// applied to the gradient path. Optional per-sample weights scale each
/// sample's loss term.
template <typename T>
Parameters<T> model_backward(const ModelConfig& config,
                             const Parameters<T>& params,
                             const ForwardCache<T>& cache,
                             const std::vector<uint8_t>& labels,
                             const std::vector<T>* sample_weights = nullptr) {
  const size_t batch = cache.batch;
  if (labels.size() != batch) {
    throw DataError("model_backward: label count does not match batch");
  }
  Parameters<T> grads = Parameters<T>::zeros(config);

  // d(mean BCE)/d(logit) for a sigmoid head.
  Tensor<T> d_logit({batch, size_t{1}});
  for (size_t b = 0; b < batch; ++b) {
    T g = (cache.probs[b] - static_cast<T>(labels[b])) /
          static_cast<T>(batch);
    if (sample_weights) g *= (*sample_weights)[b];
    d_logit.data[b] = g;
  }

  Tensor<T> d_dense2_out({batch, config.dense2_units});
  dense_backward(cache.dense2_out, params.out_weight, d_logit, d_dense2_out,
                 grads.out_weight, grads.out_bias);

  Tensor<T> d_dense2_pre = relu_backward(cache.dense2_pre, d_dense2_out);
  Tensor<T> d_dense1_out({batch, config.dense1_units});
  dense_backward(cache.dense1_out, params.dense2_weight, d_dense2_pre,
                 d_dense1_out, grads.dense2_weight, grads.dense2_bias);

  Tensor<T> d_dense1_relu = dropout_backward(d_dense1_out, cache.drop3_mask);
  Tensor<T> d_dense1_pre = relu_backward(cache.dense1_pre, d_dense1_relu);
  Tensor<T> d_stage2({batch, config.flatten_dim()});
  dense_backward(cache.stage2_out, params.dense1_weight, d_dense1_pre,
                 d_stage2, grads.dense1_weight, grads.dense1_bias);

  // Undo flatten, dropout, pool and relu of stage 2.
  d_stage2.shape = {batch, config.pool2_out_len(), config.conv2_filters};
  Tensor<T> d_pool2 = dropout_backward(d_stage2, cache.drop2_mask);
  Tensor<T> d_relu2 = maxpool1d_backward(
      {batch, config.conv2_out_len(), config.conv2_filters}, d_pool2,
      cache.pool2_argmax);
  Tensor<T> d_conv2 = relu_backward(cache.conv2_pre, d_relu2);
  Tensor<T> d_stage1(
      {batch, config.pool1_out_len(), config.conv1_filters});
  conv1d_backward(cache.stage1_out, params.conv2_kernel, d_conv2, d_stage1,
                  grads.conv2_kernel, grads.conv2_bias);

  Tensor<T> d_pool1 = dropout_backward(d_stage1, cache.drop1_mask);
  Tensor<T> d_relu1 = maxpool1d_backward(
      {batch, config.conv1_out_len(), config.conv1_filters}, d_pool1,
      cache.pool1_argmax);
  Tensor<T> d_conv1 = relu_backward(cache.conv1_pre, d_relu1);
  Tensor<T> d_embedded({batch, config.max_len, config.embed_dim});
  conv1d_backward(cache.embedded, params.conv1_kernel, d_conv1, d_embedded,
                  grads.conv1_kernel, grads.conv1_bias);

  embed_backward(cache.ids.data(), batch, config.max_len, d_embedded,
                 grads.embedding);
  return grads;
}

struct AdamConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
struct AdamState {
  Parameters<T> m;
  Parameters<T> v;
  uint64_t t = 0;
  AdamConfig config;

  static AdamState init(const ModelConfig& model, AdamConfig adam = {}) {
    AdamState state;
    state.m = Parameters<T>::zeros(model);
    state.v = Parameters<T>::zeros(model);
    state.config = adam;
    return state;
  }
};

/// One bias-corrected Adam update, applied tensor by tensor in a fixed
/// order so training stays bit-reproducible.
template <typename T>
void adam_step(Parameters<T>& params, const Parameters<T>& grads,
               AdamState<T>& state) {
  state.t += 1;
  const double b1 = state.config.beta1;
  const double b2 = state.config.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(state.t));
  const double lr = state.config.lr;
  const double eps = state.config.eps;

  auto update = [&](Tensor<T>& theta, const Tensor<T>& g, Tensor<T>& m,
                    Tensor<T>& v) {
    for (size_t i = 0; i < theta.numel(); ++i) {
      const double gi = static_cast<double>(g.data[i]);
      const double mi = b1 * static_cast<double>(m.data[i]) + (1.0 - b1) * gi;
      const double vi =
          b2 * static_cast<double>(v.data[i]) + (1.0 - b2) * gi * gi;
      m.data[i] = static_cast<T>(mi);
      v.data[i] = static_cast<T>(vi);
      const double m_hat = mi / correction1;
      const double v_hat = vi / correction2;
      theta.data[i] = static_cast<T>(static_cast<double>(theta.data[i]) -
                                     lr * m_hat / (std::sqrt(v_hat) + eps));
    }
  };
  update(params.embedding, grads.embedding, state.m.embedding,
         state.v.embedding);
  update(params.conv1_kernel, grads.conv1_kernel, state.m.conv1_kernel,
         state.v.conv1_kernel);
  update(params.conv1_bias, grads.conv1_bias, state.m.conv1_bias,
         state.v.conv1_bias);
  update(params.conv2_kernel, grads.conv2_kernel, state.m.conv2_kernel,
         state.v.conv2_kernel);
  update(params.conv2_bias, grads.conv2_bias, state.m.conv2_bias,
         state.v.conv2_bias);
  update(params.dense1_weight, grads.dense1_weight, state.m.dense1_weight,
         state.v.dense1_weight);
  update(params.dense1_bias, grads.dense1_bias, state.m.dense1_bias,
         state.v.dense1_bias);
  update(params.dense2_weight, grads.dense2_weight, state.m.dense2_weight,
         state.v.dense2_weight);
  update(params.dense2_bias, grads.dense2_bias, state.m.dense2_bias,
         state.v.dense2_bias);
  update(params.out_weight, grads.out_weight, state.m.out_weight,
         state.v.out_weight);
  update(params.out_bias, grads.out_bias, state.m.out_bias, state.v.out_bias);
}

}  // namespace bailcnn
