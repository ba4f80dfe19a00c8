#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "bailcnn/errors.hpp"
#include "bailcnn/rng.hpp"
#include "bailcnn/tensor.hpp"

namespace bailcnn {

enum class Mode { kTrain, kEval };

/// Gather: out[b,t,:] = table[ids[b*len+t],:]. The pad id (0) maps to row 0
/// like any other token; there is no masking anywhere in the stack.
template <typename T>
Tensor<T> embed_forward(const int32_t* ids, size_t batch, size_t len,
                        const Tensor<T>& table) {
  const size_t vocab = table.shape[0];
  const size_t dim = table.shape[1];
  Tensor<T> out({batch, len, dim});
  for (size_t b = 0; b < batch; ++b) {
    for (size_t t = 0; t < len; ++t) {
      const int32_t id = ids[b * len + t];
      if (id < 0 || static_cast<size_t>(id) >= vocab) {
        throw DataError("embedding: token id " + std::to_string(id) +
                        " outside vocabulary of " + std::to_string(vocab));
      }
      const T* src = table.ptr() + static_cast<size_t>(id) * dim;
      T* dst = out.ptr() + (b * len + t) * dim;
      for (size_t e = 0; e < dim; ++e) dst[e] = src[e];
    }
  }
  return out;
}

/// Accumulates upstream gradients into the gathered rows.
template <typename T>
void embed_backward(const int32_t* ids, size_t batch, size_t len,
                    const Tensor<T>& grad_out, Tensor<T>& grad_table) {
  const size_t dim = grad_table.shape[1];
  for (size_t b = 0; b < batch; ++b) {
    for (size_t t = 0; t < len; ++t) {
      const size_t row = static_cast<size_t>(ids[b * len + t]);
      const T* src = grad_out.ptr() + (b * len + t) * dim;
      T* dst = grad_table.ptr() + row * dim;
      for (size_t e = 0; e < dim; ++e) dst[e] += src[e];
    }
  }
}

/// Valid (no padding) 1-D convolution. x is [batch, L, C_in], kernel is
/// [k, C_in, C_out], output is [batch, L-k+1, C_out]. No activation here.
template <typename T>
Tensor<T> conv1d_forward(const Tensor<T>& x, const Tensor<T>& kernel,
                         const Tensor<T>& bias) {
  const size_t batch = x.shape[0], len = x.shape[1], c_in = x.shape[2];
  const size_t k = kernel.shape[0], c_out = kernel.shape[2];
  if (kernel.shape[1] != c_in) {
    throw ConfigError("conv1d: channel mismatch");
  }
  if (len < k) {
    throw ConfigError("conv1d: input length " + std::to_string(len) +
                      " shorter than kernel " + std::to_string(k));
  }
  const size_t out_len = len - k + 1;
  Tensor<T> out({batch, out_len, c_out});
  for (size_t b = 0; b < batch; ++b) {
    for (size_t t = 0; t < out_len; ++t) {
      T* out_row = out.ptr() + (b * out_len + t) * c_out;
      for (size_t o = 0; o < c_out; ++o) out_row[o] = bias.data[o];
      for (size_t dt = 0; dt < k; ++dt) {
        const T* x_row = x.ptr() + (b * len + t + dt) * c_in;
        const T* k_rows = kernel.ptr() + dt * c_in * c_out;
        for (size_t i = 0; i < c_in; ++i) {
          const T xv = x_row[i];
          const T* k_row = k_rows + i * c_out;
          for (size_t o = 0; o < c_out; ++o) out_row[o] += xv * k_row[o];
        }
      }
    }
  }
  return out;
}

template <typename T>
void conv1d_backward(const Tensor<T>& x, const Tensor<T>& kernel,
                     const Tensor<T>& grad_out, Tensor<T>& grad_x,
                     Tensor<T>& grad_kernel, Tensor<T>& grad_bias) {
  const size_t batch = x.shape[0], len = x.shape[1], c_in = x.shape[2];
  const size_t k = kernel.shape[0], c_out = kernel.shape[2];
  const size_t out_len = len - k + 1;
  for (size_t b = 0; b < batch; ++b) {
    for (size_t t = 0; t < out_len; ++t) {
      const T* g_row = grad_out.ptr() + (b * out_len + t) * c_out;
      for (size_t o = 0; o < c_out; ++o) grad_bias.data[o] += g_row[o];
      for (size_t dt = 0; dt < k; ++dt) {
        const T* x_row = x.ptr() + (b * len + t + dt) * c_in;
        T* gx_row = grad_x.ptr() + (b * len + t + dt) * c_in;
        const T* k_rows = kernel.ptr() + dt * c_in * c_out;
        T* gk_rows = grad_kernel.ptr() + dt * c_in * c_out;
        for (size_t i = 0; i < c_in; ++i) {
          const T xv = x_row[i];
          const T* k_row = k_rows + i * c_out;
          T* gk_row = gk_rows + i * c_out;
          T acc = T(0);
          for (size_t o = 0; o < c_out; ++o) {
            const T g = g_row[o];
            gk_row[o] += xv * g;
            acc += k_row[o] * g;
          }
          gx_row[i] += acc;
        }
      }
    }
  }
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  Tensor<T> out(x.shape);
  for (size_t i = 0; i < x.numel(); ++i) {
    out.data[i] = x.data[i] > T(0) ? x.data[i] : T(0);
  }
  return out;
}

/// grad_in = grad_out where pre-activation was positive, else 0.
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& pre, const Tensor<T>& grad_out) {
  Tensor<T> out(pre.shape);
  for (size_t i = 0; i < pre.numel(); ++i) {
    out.data[i] = pre.data[i] > T(0) ? grad_out.data[i] : T(0);
  }
  return out;
}

/// Non-overlapping window max over the spatial axis, stride = pool size,
/// remainder truncated. x is [batch, L, C]; argmax (if given) records the
/// winning spatial index per output cell, first index on ties.
template <typename T>
Tensor<T> maxpool1d(const Tensor<T>& x, size_t pool,
                    std::vector<uint32_t>* argmax = nullptr) {
  const size_t batch = x.shape[0], len = x.shape[1], channels = x.shape[2];
  if (pool == 0 || len < pool) {
    throw ConfigError("maxpool1d: spatial length " + std::to_string(len) +
                      " shorter than pool " + std::to_string(pool));
  }
  const size_t out_len = len / pool;
  Tensor<T> out({batch, out_len, channels});
  if (argmax) argmax->assign(out.numel(), 0);
  for (size_t b = 0; b < batch; ++b) {
    for (size_t p = 0; p < out_len; ++p) {
      const size_t base = p * pool;
      for (size_t c = 0; c < channels; ++c) {
        T best = x.data[(b * len + base) * channels + c];
        size_t best_t = base;
        for (size_t w = 1; w < pool; ++w) {
          const T v = x.data[(b * len + base + w) * channels + c];
          if (v > best) {
            best = v;
            best_t = base + w;
          }
        }
        const size_t oi = (b * out_len + p) * channels + c;
        out.data[oi] = best;
        if (argmax) (*argmax)[oi] = static_cast<uint32_t>(best_t);
      }
    }
  }
  return out;
}

/// Scatters gradients back to the recorded argmax positions.
template <typename T>
Tensor<T> maxpool1d_backward(const std::vector<size_t>& in_shape,
                             const Tensor<T>& grad_out,
                             const std::vector<uint32_t>& argmax) {
  const size_t len = in_shape[1], channels = in_shape[2];
  const size_t batch = in_shape[0];
  const size_t out_len = grad_out.shape[1];
  Tensor<T> grad_in(in_shape);
  for (size_t b = 0; b < batch; ++b) {
    for (size_t p = 0; p < out_len; ++p) {
      for (size_t c = 0; c < channels; ++c) {
        const size_t oi = (b * out_len + p) * channels + c;
        grad_in.data[(b * len + argmax[oi]) * channels + c] +=
            grad_out.data[oi];
      }
    }
  }
  return grad_in;
}

/// [batch, T, C] -> [batch, T*C]; row-major, so this is a reshape.
template <typename T>
Tensor<T> flatten(const Tensor<T>& x) {
  Tensor<T> out = x;
  size_t rest = 1;
  for (size_t i = 1; i < x.shape.size(); ++i) rest *= x.shape[i];
  out.shape = {x.shape[0], rest};
  return out;
}

/// Inverted dropout: train mode zeroes each element with probability
/// `rate` and scales survivors by 1/(1-rate); eval mode is the identity.
/// mask_out receives the per-element multiplier for the backward pass.
template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double rate, Mode mode, Rng& rng,
                  std::vector<T>* mask_out = nullptr) {
  if (rate < 0.0 || rate >= 1.0) {
    throw ConfigError("dropout rate must be in [0, 1)");
  }
  if (mode == Mode::kEval || rate == 0.0) {
    if (mask_out) mask_out->clear();
    return x;
  }
  const T scale = static_cast<T>(1.0 / (1.0 - rate));
  Tensor<T> out(x.shape);
  if (mask_out) mask_out->assign(x.numel(), T(0));
  for (size_t i = 0; i < x.numel(); ++i) {
    const T m = rng.next_double() < rate ? T(0) : scale;
    out.data[i] = x.data[i] * m;
    if (mask_out) (*mask_out)[i] = m;
  }
  return out;
}

/// Applies a saved dropout mask to the gradient (empty mask = identity).
template <typename T>
Tensor<T> dropout_backward(const Tensor<T>& grad_out,
                           const std::vector<T>& mask) {
  if (mask.empty()) return grad_out;
  Tensor<T> out(grad_out.shape);
  for (size_t i = 0; i < grad_out.numel(); ++i) {
    out.data[i] = grad_out.data[i] * mask[i];
  }
  return out;
}

/// out = x . W + b with x [batch, n_in], W [n_in, n_out].
template <typename T>
Tensor<T> dense_forward(const Tensor<T>& x, const Tensor<T>& weight,
                        const Tensor<T>& bias) {
  const size_t batch = x.shape[0], n_in = x.shape[1];
  if (weight.shape[0] != n_in) {
    throw ConfigError("dense: input width " + std::to_string(n_in) +
                      " does not match weight rows " +
                      std::to_string(weight.shape[0]));
  }
  const size_t n_out = weight.shape[1];
  Tensor<T> out({batch, n_out});
  for (size_t b = 0; b < batch; ++b) {
    T* out_row = out.ptr() + b * n_out;
    for (size_t j = 0; j < n_out; ++j) out_row[j] = bias.data[j];
    const T* x_row = x.ptr() + b * n_in;
    for (size_t n = 0; n < n_in; ++n) {
      const T xv = x_row[n];
      const T* w_row = weight.ptr() + n * n_out;
      for (size_t j = 0; j < n_out; ++j) out_row[j] += xv * w_row[j];
    }
  }
  return out;
}

template <typename T>
void dense_backward(const Tensor<T>& x, const Tensor<T>& weight,
                    const Tensor<T>& grad_out, Tensor<T>& grad_x,
                    Tensor<T>& grad_weight, Tensor<T>& grad_bias) {
  const size_t batch = x.shape[0], n_in = x.shape[1];
  const size_t n_out = weight.shape[1];
  for (size_t b = 0; b < batch; ++b) {
    const T* g_row = grad_out.ptr() + b * n_out;
    for (size_t j = 0; j < n_out; ++j) grad_bias.data[j] += g_row[j];
    const T* x_row = x.ptr() + b * n_in;
    T* gx_row = grad_x.ptr() + b * n_in;
    for (size_t n = 0; n < n_in; ++n) {
      const T xv = x_row[n];
      const T* w_row = weight.ptr() + n * n_out;
      T* gw_row = grad_weight.ptr() + n * n_out;
      T acc = T(0);
      for (size_t j = 0; j < n_out; ++j) {
        const T g = g_row[j];
        gw_row[j] += xv * g;
        acc += w_row[j] * g;
      }
      gx_row[n] += acc;
    }
  }
}

/// Numerically stable logistic function; finite in (0,1) for any z.
template <typename T>
T sigmoid(T z) {
  if (z >= T(0)) {
    return T(1) / (T(1) + std::exp(-z));
  }
  const T e = std::exp(z);
  return e / (T(1) + e);
}

inline constexpr double kBceEpsilon = 1e-7;

/// Mean binary cross-entropy over the batch; probabilities are clamped to
/// [eps, 1-eps] first. Optional per-sample weights rescale each term.
template <typename T>
T bce_loss(const std::vector<T>& probs, const std::vector<uint8_t>& labels,
           const std::vector<T>* weights = nullptr) {
  if (probs.size() != labels.size() || probs.empty()) {
    throw DataError("bce_loss: probability/label size mismatch");
  }
  double sum = 0.0;
  for (size_t i = 0; i < probs.size(); ++i) {
    double p = static_cast<double>(probs[i]);
    p = std::min(std::max(p, kBceEpsilon), 1.0 - kBceEpsilon);
    const double term =
        labels[i] ? -std::log(p) : -std::log1p(-p);
    sum += weights ? static_cast<double>((*weights)[i]) * term : term;
  }
  return static_cast<T>(sum / static_cast<double>(probs.size()));
}

}  // namespace bailcnn
