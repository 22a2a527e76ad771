#include "kws/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <string>

#include "kws/error.hpp"

namespace kws {
namespace {

using MatrixD = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void require_rank(const Tensor& t, std::size_t rank, const char* what) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(what) + ": expected rank " + std::to_string(rank) + ", got shape " +
                     shape_string(t.shape()));
  }
}

void check_conv_shapes(const Tensor& input, const ConvParams& p) {
  require_rank(input, 4, "conv2d input");
  require_rank(p.weights, 4, "conv2d weights");
  if (p.weights.dim(2) != kKernelSize || p.weights.dim(3) != kKernelSize) {
    throw ShapeError("conv2d weights: kernel must be 3x3, got " + shape_string(p.weights.shape()));
  }
  if (input.dim(1) != p.in_channels()) {
    throw ShapeError("conv2d: input channel dimension C=" + std::to_string(input.dim(1)) +
                     " does not match weight n_in=" + std::to_string(p.in_channels()));
  }
  if (p.dilation.width < 1 || p.dilation.height < 1) {
    throw ShapeError("conv2d: dilation must be >= 1");
  }
}

// Column matrix (C*9, H*W) for one sample; row = c*9 + i*3 + j.
void im2col(const Tensor& input, std::size_t n, Dilation d, MatrixD& col) {
  const std::size_t C = input.dim(1), H = input.dim(2), W = input.dim(3);
  col.setZero(static_cast<Eigen::Index>(C * 9), static_cast<Eigen::Index>(H * W));
  const float* base = input.data().data() + n * C * H * W;
  for (std::size_t c = 0; c < C; ++c) {
    const float* plane = base + c * H * W;
    for (int i = 0; i < 3; ++i) {
      const long dy = static_cast<long>(i - 1) * d.height;
      for (int j = 0; j < 3; ++j) {
        const long dx = static_cast<long>(j - 1) * d.width;
        double* row = col.data() + (c * 9 + static_cast<std::size_t>(i * 3 + j)) * H * W;
        const long x_begin = std::max(0L, -dx);
        const long x_end = std::min(static_cast<long>(W), static_cast<long>(W) - dx);
        for (long y = 0; y < static_cast<long>(H); ++y) {
          const long yy = y + dy;
          if (yy < 0 || yy >= static_cast<long>(H)) continue;
          const float* src = plane + yy * static_cast<long>(W);
          double* dst = row + y * static_cast<long>(W);
          for (long x = x_begin; x < x_end; ++x) dst[x] = src[x + dx];
        }
      }
    }
  }
}

void col2im_add(const MatrixD& col, std::size_t n, Dilation d, Tensor& grad_input) {
  const std::size_t C = grad_input.dim(1), H = grad_input.dim(2), W = grad_input.dim(3);
  std::vector<double> acc(C * H * W, 0.0);
  for (std::size_t c = 0; c < C; ++c) {
    double* plane = acc.data() + c * H * W;
    for (int i = 0; i < 3; ++i) {
      const long dy = static_cast<long>(i - 1) * d.height;
      for (int j = 0; j < 3; ++j) {
        const long dx = static_cast<long>(j - 1) * d.width;
        const double* row = col.data() + (c * 9 + static_cast<std::size_t>(i * 3 + j)) * H * W;
        const long x_begin = std::max(0L, -dx);
        const long x_end = std::min(static_cast<long>(W), static_cast<long>(W) - dx);
        for (long y = 0; y < static_cast<long>(H); ++y) {
          const long yy = y + dy;
          if (yy < 0 || yy >= static_cast<long>(H)) continue;
          const double* src = row + y * static_cast<long>(W);
          double* dst = plane + yy * static_cast<long>(W);
          for (long x = x_begin; x < x_end; ++x) dst[x + dx] += src[x];
        }
      }
    }
  }
  float* out = grad_input.data().data() + n * C * H * W;
  for (std::size_t k = 0; k < acc.size(); ++k) out[k] = static_cast<float>(acc[k]);
}

MatrixD weight_matrix(const ConvParams& p) {
  MatrixD w(static_cast<Eigen::Index>(p.out_channels()), static_cast<Eigen::Index>(p.in_channels() * 9));
  const auto src = p.weights.data();
  std::copy(src.begin(), src.end(), w.data());
  return w;
}

}  // namespace

Tensor conv2d(const Tensor& input, const ConvParams& params) {
  check_conv_shapes(input, params);
  const std::size_t N = input.dim(0), H = input.dim(2), W = input.dim(3);
  const std::size_t O = params.out_channels();
  const MatrixD w = weight_matrix(params);
  Tensor out({N, O, H, W});
  MatrixD col;
  MatrixD result;
  for (std::size_t n = 0; n < N; ++n) {
    im2col(input, n, params.dilation, col);
    result.noalias() = w * col;
    float* dst = out.data().data() + n * O * H * W;
    for (Eigen::Index k = 0; k < result.size(); ++k) dst[k] = static_cast<float>(result.data()[k]);
  }
  return out;
}

ConvGrads conv2d_backward(const Tensor& grad_out, const Tensor& input, const ConvParams& params) {
  if (input.empty()) throw Error("conv2d_backward: forward input was not saved");
  check_conv_shapes(input, params);
  const std::size_t N = input.dim(0), H = input.dim(2), W = input.dim(3);
  const std::size_t O = params.out_channels();
  if (grad_out.shape() != Shape{N, O, H, W}) {
    throw ShapeError("conv2d_backward: grad_out shape " + shape_string(grad_out.shape()) + " expected " +
                     shape_string({N, O, H, W}));
  }
  const MatrixD w = weight_matrix(params);
  MatrixD grad_w = MatrixD::Zero(w.rows(), w.cols());
  ConvGrads grads{Tensor(input.shape()), Tensor(params.weights.shape())};
  MatrixD col;
  MatrixD g(static_cast<Eigen::Index>(O), static_cast<Eigen::Index>(H * W));
  MatrixD grad_col;
  for (std::size_t n = 0; n < N; ++n) {
    const float* src = grad_out.data().data() + n * O * H * W;
    std::copy(src, src + O * H * W, g.data());
    im2col(input, n, params.dilation, col);
    grad_w.noalias() += g * col.transpose();
    grad_col.noalias() = w.transpose() * g;
    col2im_add(grad_col, n, params.dilation, grads.input);
  }
  auto gw = grads.weights.data();
  for (std::size_t k = 0; k < gw.size(); ++k) gw[k] = static_cast<float>(grad_w.data()[k]);
  return grads;
}

Tensor batch_norm(const Tensor& input, BatchNormState& state, Mode mode, BatchNormSaved* saved) {
  require_rank(input, 4, "batch_norm input");
  const std::size_t N = input.dim(0), C = input.dim(1), S = input.dim(2) * input.dim(3);
  if (C != state.channels()) {
    throw ShapeError("batch_norm: input has " + std::to_string(C) + " channels, state has " +
                     std::to_string(state.channels()));
  }
  std::vector<double> mean(C, 0.0), var(C, 0.0);
  const auto x = input.data();
  if (mode == Mode::train) {
    const double count = static_cast<double>(N * S);
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t c = 0; c < C; ++c) {
        const float* p = x.data() + (n * C + c) * S;
        double s = 0.0;
        for (std::size_t k = 0; k < S; ++k) s += p[k];
        mean[c] += s;
      }
    for (auto& m : mean) m /= count;
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t c = 0; c < C; ++c) {
        const float* p = x.data() + (n * C + c) * S;
        double s = 0.0;
        for (std::size_t k = 0; k < S; ++k) {
          const double d = p[k] - mean[c];
          s += d * d;
        }
        var[c] += s;
      }
    for (auto& v : var) v /= count;
    const double unbias = count > 1.0 ? count / (count - 1.0) : 1.0;
    for (std::size_t c = 0; c < C; ++c) {
      state.running_mean[c] = static_cast<float>((1.0 - state.momentum) * state.running_mean[c] + state.momentum * mean[c]);
      state.running_var[c] =
          static_cast<float>((1.0 - state.momentum) * state.running_var[c] + state.momentum * var[c] * unbias);
    }
  } else {
    for (std::size_t c = 0; c < C; ++c) {
      mean[c] = state.running_mean[c];
      var[c] = state.running_var[c];
    }
  }
  std::vector<double> inv_std(C);
  for (std::size_t c = 0; c < C; ++c) inv_std[c] = 1.0 / std::sqrt(var[c] + state.epsilon);

  Tensor out(input.shape());
  auto y = out.data();
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t c = 0; c < C; ++c) {
      const std::size_t off = (n * C + c) * S;
      for (std::size_t k = 0; k < S; ++k) y[off + k] = static_cast<float>((x[off + k] - mean[c]) * inv_std[c]);
    }
  if (saved) {
    saved->normalized = out;
    saved->inv_std = std::move(inv_std);
    saved->mode = mode;
  }
  return out;
}

Tensor batch_norm_backward(const Tensor& grad_out, const BatchNormSaved& saved) {
  if (saved.normalized.empty()) throw Error("batch_norm_backward: forward state was not saved");
  if (grad_out.shape() != saved.normalized.shape()) {
    throw ShapeError("batch_norm_backward: grad_out shape " + shape_string(grad_out.shape()) + " expected " +
                     shape_string(saved.normalized.shape()));
  }
  const std::size_t N = grad_out.dim(0), C = grad_out.dim(1), S = grad_out.dim(2) * grad_out.dim(3);
  const auto dy = grad_out.data();
  const auto xh = saved.normalized.data();
  Tensor grad_in(grad_out.shape());
  auto dx = grad_in.data();
  if (saved.mode == Mode::eval) {
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t c = 0; c < C; ++c) {
        const std::size_t off = (n * C + c) * S;
        for (std::size_t k = 0; k < S; ++k) dx[off + k] = static_cast<float>(dy[off + k] * saved.inv_std[c]);
      }
    return grad_in;
  }
  std::vector<double> sum_dy(C, 0.0), sum_dy_xh(C, 0.0);
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t c = 0; c < C; ++c) {
      const std::size_t off = (n * C + c) * S;
      for (std::size_t k = 0; k < S; ++k) {
        sum_dy[c] += dy[off + k];
        sum_dy_xh[c] += static_cast<double>(dy[off + k]) * xh[off + k];
      }
    }
  const double count = static_cast<double>(N * S);
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t c = 0; c < C; ++c) {
      const std::size_t off = (n * C + c) * S;
      const double scale = saved.inv_std[c] / count;
      for (std::size_t k = 0; k < S; ++k) {
        dx[off + k] =
            static_cast<float>(scale * (count * dy[off + k] - sum_dy[c] - xh[off + k] * sum_dy_xh[c]));
      }
    }
  return grad_in;
}

Tensor relu(const Tensor& input) {
  Tensor out(input.shape());
  const auto x = input.data();
  auto y = out.data();
  for (std::size_t k = 0; k < x.size(); ++k) y[k] = x[k] > 0.0f ? x[k] : 0.0f;
  return out;
}

Tensor relu_backward(const Tensor& grad_out, const Tensor& output) {
  if (grad_out.shape() != output.shape()) throw ShapeError("relu_backward: shape mismatch");
  Tensor grad_in(output.shape());
  const auto g = grad_out.data();
  const auto y = output.data();
  auto dx = grad_in.data();
  for (std::size_t k = 0; k < g.size(); ++k) dx[k] = y[k] > 0.0f ? g[k] : 0.0f;
  return grad_in;
}

Tensor avg_pool(const Tensor& input, PoolWindow window) {
  require_rank(input, 4, "avg_pool input");
  const std::size_t N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
  if (window.height == 0 || window.width == 0) throw ShapeError("avg_pool: window must be positive");
  if (window.height > H || window.width > W) {
    throw ShapeError("avg_pool: window " + std::to_string(window.height) + "x" + std::to_string(window.width) +
                     " larger than input " + std::to_string(H) + "x" + std::to_string(W));
  }
  const std::size_t Ho = H / window.height, Wo = W / window.width;
  const double inv = 1.0 / static_cast<double>(window.height * window.width);
  Tensor out({N, C, Ho, Wo});
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t y = 0; y < Ho; ++y)
        for (std::size_t x = 0; x < Wo; ++x) {
          double s = 0.0;
          for (std::size_t i = 0; i < window.height; ++i)
            for (std::size_t j = 0; j < window.width; ++j)
              s += input.at(n, c, y * window.height + i, x * window.width + j);
          out.at(n, c, y, x) = static_cast<float>(s * inv);
        }
  return out;
}

Tensor avg_pool_backward(const Tensor& grad_out, const Shape& input_shape, PoolWindow window) {
  Tensor grad_in(input_shape);
  const std::size_t N = input_shape[0], C = input_shape[1];
  const std::size_t Ho = input_shape[2] / window.height, Wo = input_shape[3] / window.width;
  if (grad_out.shape() != Shape{N, C, Ho, Wo}) throw ShapeError("avg_pool_backward: grad_out shape mismatch");
  const float inv = 1.0f / static_cast<float>(window.height * window.width);
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t y = 0; y < Ho; ++y)
        for (std::size_t x = 0; x < Wo; ++x) {
          const float g = grad_out.at(n, c, y, x) * inv;
          for (std::size_t i = 0; i < window.height; ++i)
            for (std::size_t j = 0; j < window.width; ++j)
              grad_in.at(n, c, y * window.height + i, x * window.width + j) = g;
        }
  return grad_in;
}

Tensor global_avg_pool(const Tensor& input) {
  require_rank(input, 4, "global_avg_pool input");
  const std::size_t N = input.dim(0), C = input.dim(1), S = input.dim(2) * input.dim(3);
  Tensor out({N, C});
  const auto x = input.data();
  for (std::size_t nc = 0; nc < N * C; ++nc) {
    double s = 0.0;
    for (std::size_t k = 0; k < S; ++k) s += x[nc * S + k];
    out[nc] = static_cast<float>(s / static_cast<double>(S));
  }
  return out;
}

Tensor global_avg_pool_backward(const Tensor& grad_out, const Shape& input_shape) {
  const std::size_t N = input_shape[0], C = input_shape[1], S = input_shape[2] * input_shape[3];
  if (grad_out.shape() != Shape{N, C}) throw ShapeError("global_avg_pool_backward: grad_out shape mismatch");
  Tensor grad_in(input_shape);
  auto dx = grad_in.data();
  for (std::size_t nc = 0; nc < N * C; ++nc) {
    const float g = grad_out[nc] / static_cast<float>(S);
    std::fill(dx.begin() + static_cast<std::ptrdiff_t>(nc * S), dx.begin() + static_cast<std::ptrdiff_t>((nc + 1) * S), g);
  }
  return grad_in;
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("add: shapes " + shape_string(a.shape()) + " and " + shape_string(b.shape()) + " differ");
  }
  Tensor out(a.shape());
  auto y = out.data();
  for (std::size_t k = 0; k < y.size(); ++k) y[k] = a[k] + b[k];
  return out;
}

namespace {

void check_linear(const Tensor& input, const Tensor& weights) {
  require_rank(input, 2, "softmax input");
  require_rank(weights, 2, "softmax weights");
  if (input.dim(1) != weights.dim(0)) {
    throw ShapeError("softmax: input features C=" + std::to_string(input.dim(1)) + " do not match weight rows " +
                     std::to_string(weights.dim(0)));
  }
}

}  // namespace

Tensor linear_softmax(const Tensor& input, const Tensor& weights) {
  check_linear(input, weights);
  const std::size_t N = input.dim(0), C = input.dim(1), K = weights.dim(1);
  Tensor probs({N, K});
  std::vector<double> logits(K);
  for (std::size_t n = 0; n < N; ++n) {
    std::fill(logits.begin(), logits.end(), 0.0);
    for (std::size_t c = 0; c < C; ++c) {
      const double v = input[n * C + c];
      for (std::size_t k = 0; k < K; ++k) logits[k] += v * weights[c * K + k];
    }
    const double mx = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (auto& l : logits) {
      l = std::exp(l - mx);
      z += l;
    }
    for (std::size_t k = 0; k < K; ++k) probs[n * K + k] = static_cast<float>(logits[k] / z);
  }
  return probs;
}

SoftmaxXent linear_softmax_xent(const Tensor& input, const Tensor& weights, std::span<const int> labels) {
  check_linear(input, weights);
  const std::size_t N = input.dim(0), C = input.dim(1), K = weights.dim(1);
  if (labels.size() != N) throw ShapeError("softmax_xent: label count does not match batch size");
  SoftmaxXent result{0.0, Tensor({N, K})};
  std::vector<double> logits(K);
  for (std::size_t n = 0; n < N; ++n) {
    if (labels[n] < 0 || static_cast<std::size_t>(labels[n]) >= K) {
      throw ShapeError("softmax_xent: label " + std::to_string(labels[n]) + " out of range");
    }
    std::fill(logits.begin(), logits.end(), 0.0);
    for (std::size_t c = 0; c < C; ++c) {
      const double v = input[n * C + c];
      for (std::size_t k = 0; k < K; ++k) logits[k] += v * weights[c * K + k];
    }
    const double mx = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (std::size_t k = 0; k < K; ++k) z += std::exp(logits[k] - mx);
    const double log_z = mx + std::log(z);
    result.loss += log_z - logits[static_cast<std::size_t>(labels[n])];
    for (std::size_t k = 0; k < K; ++k) {
      result.probabilities[n * K + k] = static_cast<float>(std::exp(logits[k] - log_z));
    }
  }
  result.loss /= static_cast<double>(N);
  return result;
}

LinearGrads linear_softmax_xent_backward(const Tensor& input, const Tensor& weights, const Tensor& probabilities,
                                         std::span<const int> labels) {
  check_linear(input, weights);
  const std::size_t N = input.dim(0), C = input.dim(1), K = weights.dim(1);
  if (probabilities.shape() != Shape{N, K}) throw ShapeError("softmax_xent_backward: probabilities shape mismatch");
  std::vector<double> dlogits(N * K);
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t k = 0; k < K; ++k) {
      const double target = static_cast<std::size_t>(labels[n]) == k ? 1.0 : 0.0;
      dlogits[n * K + k] = (probabilities[n * K + k] - target) / static_cast<double>(N);
    }
  LinearGrads grads{Tensor(input.shape()), Tensor(weights.shape())};
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t k = 0; k < K; ++k) {
      double s = 0.0;
      for (std::size_t n = 0; n < N; ++n) s += input[n * C + c] * dlogits[n * K + k];
      grads.weights[c * K + k] = static_cast<float>(s);
    }
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t c = 0; c < C; ++c) {
      double s = 0.0;
      for (std::size_t k = 0; k < K; ++k) s += dlogits[n * K + k] * weights[c * K + k];
      grads.input[n * C + c] = static_cast<float>(s);
    }
  return grads;
}

}  // namespace kws
