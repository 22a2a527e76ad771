#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "kws/tensor.hpp"

namespace kws {

/// Tap spacing of a 3x3 kernel. `height` runs along the time axis (H),
/// `width` along the frequency axis (W).
struct Dilation {
  int width = 1;
  int height = 1;
  friend bool operator==(const Dilation&, const Dilation&) = default;
};

/// Bias-free 3x3 convolution with zero "same" padding.
/// `weights` has shape (n_out, n_in, 3, 3).
struct ConvParams {
  Tensor weights;
  Dilation dilation;

  std::size_t out_channels() const { return weights.dim(0); }
  std::size_t in_channels() const { return weights.dim(1); }
};

inline constexpr std::size_t kKernelSize = 3;

/// out[n,o,y,x] = sum_{c,i,j} w[o,c,i,j] * in[n,c, y+(i-1)*d_h, x+(j-1)*d_w],
/// reading zero outside the input. Reductions accumulate in double.
Tensor conv2d(const Tensor& input, const ConvParams& params);

struct ConvGrads {
  Tensor input;
  Tensor weights;
};

/// Gradients of a scalar loss given dL/d(out). `input` is the tensor that was
/// passed to the forward call.
ConvGrads conv2d_backward(const Tensor& grad_out, const Tensor& input, const ConvParams& params);

enum class Mode { train, eval };

/// Affine-free batch normalization state (no learned scale or shift).
struct BatchNormState {
  std::vector<float> running_mean;
  std::vector<float> running_var;
  float epsilon = 1e-5f;
  float momentum = 0.1f;

  BatchNormState() = default;
  explicit BatchNormState(std::size_t channels) : running_mean(channels, 0.0f), running_var(channels, 1.0f) {}
  std::size_t channels() const { return running_mean.size(); }
};

/// Values the backward pass needs from a batch_norm forward call.
struct BatchNormSaved {
  Tensor normalized;
  std::vector<double> inv_std;
  Mode mode = Mode::eval;
};

/// Train mode normalizes each channel by batch statistics (biased variance)
/// and folds them into the running estimates (unbiased variance, like
/// PyTorch). Eval mode normalizes with the running estimates.
Tensor batch_norm(const Tensor& input, BatchNormState& state, Mode mode, BatchNormSaved* saved = nullptr);
Tensor batch_norm_backward(const Tensor& grad_out, const BatchNormSaved& saved);

Tensor relu(const Tensor& input);
/// dL/dx given dL/dy and the forward *output*.
Tensor relu_backward(const Tensor& grad_out, const Tensor& output);

struct PoolWindow {
  std::size_t height = 1;
  std::size_t width = 1;
  friend bool operator==(const PoolWindow&, const PoolWindow&) = default;
};

/// Non-overlapping average pooling with stride equal to the window. Partial
/// windows at the bottom/right borders are dropped.
Tensor avg_pool(const Tensor& input, PoolWindow window);
Tensor avg_pool_backward(const Tensor& grad_out, const Shape& input_shape, PoolWindow window);

/// Mean over H and W: (N, C, H, W) -> (N, C).
Tensor global_avg_pool(const Tensor& input);
Tensor global_avg_pool_backward(const Tensor& grad_out, const Shape& input_shape);

/// Elementwise a + b.
Tensor add(const Tensor& a, const Tensor& b);

/// Row-wise softmax of input (N, C) times weights (C, K).
Tensor linear_softmax(const Tensor& input, const Tensor& weights);

struct SoftmaxXent {
  double loss = 0.0;       // mean cross entropy over the batch
  Tensor probabilities;    // (N, K)
};

SoftmaxXent linear_softmax_xent(const Tensor& input, const Tensor& weights, std::span<const int> labels);

struct LinearGrads {
  Tensor input;
  Tensor weights;
};

/// Gradients of the mean cross entropy w.r.t. input and weights.
LinearGrads linear_softmax_xent_backward(const Tensor& input, const Tensor& weights, const Tensor& probabilities,
                                         std::span<const int> labels);

}  // namespace kws
