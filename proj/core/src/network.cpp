#include "kws/network.hpp"

#include <cmath>
#include <random>

#include "kws/error.hpp"

namespace kws {

// Saved forward state, one entry per layer.
struct Network::Trace {
  std::vector<Tensor> saved;          // conv input, relu output, softmax input
  std::vector<BatchNormSaved> bn;     // batch_norm
  std::vector<Shape> input_shape;     // pooling
  std::vector<int> labels;
  Tensor probabilities;
};

Network::Network(ArchSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
  std::mt19937_64 rng(seed);
  std::size_t channels = 1;
  for (const auto& layer : spec_.layers()) {
    Slot slot{layer, {}, {}, {}};
    if (layer.kind == LayerKind::conv) {
      slot.conv.weights = Tensor({layer.channels, channels, kKernelSize, kKernelSize});
      slot.conv.dilation = layer.dilation;
      std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(channels * 9)));
      for (float& w : slot.conv.weights.data()) w = static_cast<float>(dist(rng));
      slot.conv.weights.zero_grad();
    } else if (layer.kind == LayerKind::batch_norm) {
      slot.bn = BatchNormState(layer.channels);
    } else if (layer.kind == LayerKind::softmax) {
      slot.softmax = Tensor({channels, layer.channels});
      const double bound = 1.0 / std::sqrt(static_cast<double>(channels));
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (float& w : slot.softmax.data()) w = static_cast<float>(dist(rng));
      slot.softmax.zero_grad();
    }
    if (layer.kind == LayerKind::conv) channels = layer.channels;
    slots_.push_back(std::move(slot));
  }
}

Tensor Network::run(const Tensor& input, Mode mode, Trace* trace) {
  if (input.rank() != 4 || input.dim(1) != 1) {
    throw ShapeError("network input must be (N, 1, T, F), got " + shape_string(input.shape()));
  }
  if (trace) {
    trace->saved.assign(slots_.size(), Tensor());
    trace->bn.assign(slots_.size(), BatchNormSaved());
    trace->input_shape.assign(slots_.size(), Shape());
  }
  Tensor x = input;
  Tensor block_input;
  for (std::size_t l = 0; l < slots_.size(); ++l) {
    Slot& slot = slots_[l];
    const LayerSpec& layer = slot.layer;
    const bool block_start = layer.block >= 0 && (l == 0 || slots_[l - 1].layer.block != layer.block);
    if (block_start) block_input = x;
    switch (layer.kind) {
      case LayerKind::conv:
        if (trace) {
          trace->saved[l] = std::move(x);
          x = conv2d(trace->saved[l], slot.conv);
        } else {
          x = conv2d(x, slot.conv);
        }
        break;
      case LayerKind::relu:
        x = relu(x);
        if (trace) trace->saved[l] = x;
        break;
      case LayerKind::batch_norm:
        x = batch_norm(x, slot.bn, mode, trace ? &trace->bn[l] : nullptr);
        break;
      case LayerKind::avg_pool:
        if (trace) trace->input_shape[l] = x.shape();
        x = avg_pool(x, layer.window);
        break;
      case LayerKind::residual_add:
        x = add(x, block_input);
        break;
      case LayerKind::global_avg_pool:
        if (trace) trace->input_shape[l] = x.shape();
        x = global_avg_pool(x);
        break;
      case LayerKind::softmax:
        if (trace) {
          trace->saved[l] = x;
          auto result = linear_softmax_xent(x, slot.softmax, trace->labels);
          trace->probabilities = result.probabilities;
          x = Tensor({1}, {static_cast<float>(result.loss)});
        } else {
          x = linear_softmax(x, slot.softmax);
        }
        break;
    }
  }
  return x;
}

Tensor Network::forward(const Tensor& input, Mode mode) { return run(input, mode, nullptr); }

Network::StepResult Network::forward_backward(const Tensor& input, std::span<const int> labels) {
  Trace trace;
  trace.labels.assign(labels.begin(), labels.end());
  if (labels.size() != input.dim(0)) throw ShapeError("forward_backward: label count does not match batch size");
  const Tensor loss = run(input, Mode::train, &trace);

  Tensor grad;
  Tensor skip_grad;
  for (std::size_t l = slots_.size(); l-- > 0;) {
    Slot& slot = slots_[l];
    const LayerSpec& layer = slot.layer;
    switch (layer.kind) {
      case LayerKind::softmax: {
        auto g = linear_softmax_xent_backward(trace.saved[l], slot.softmax, trace.probabilities, trace.labels);
        std::copy(g.weights.data().begin(), g.weights.data().end(), slot.softmax.grad().begin());
        grad = std::move(g.input);
        break;
      }
      case LayerKind::global_avg_pool:
        grad = global_avg_pool_backward(grad, trace.input_shape[l]);
        break;
      case LayerKind::residual_add:
        skip_grad = grad;
        break;
      case LayerKind::batch_norm:
        grad = batch_norm_backward(grad, trace.bn[l]);
        break;
      case LayerKind::relu:
        grad = relu_backward(grad, trace.saved[l]);
        break;
      case LayerKind::avg_pool:
        grad = avg_pool_backward(grad, trace.input_shape[l], layer.window);
        break;
      case LayerKind::conv: {
        auto g = conv2d_backward(grad, trace.saved[l], slot.conv);
        std::copy(g.weights.data().begin(), g.weights.data().end(), slot.conv.weights.grad().begin());
        grad = std::move(g.input);
        break;
      }
    }
    const bool block_start = layer.block >= 0 && (l == 0 || slots_[l - 1].layer.block != layer.block);
    if (block_start) {
      grad = add(grad, skip_grad);
      skip_grad = Tensor();
    }
  }
  return {static_cast<double>(loss[0]), std::move(trace.probabilities)};
}

std::vector<NamedParameter> Network::parameters() {
  std::vector<NamedParameter> out;
  for (auto& slot : slots_) {
    if (slot.layer.kind == LayerKind::conv) out.push_back({slot.layer.name, &slot.conv.weights});
    if (slot.layer.kind == LayerKind::softmax) out.push_back({slot.layer.name, &slot.softmax});
  }
  return out;
}

std::vector<NamedBatchNorm> Network::batch_norms() {
  std::vector<NamedBatchNorm> out;
  for (auto& slot : slots_) {
    if (slot.layer.kind == LayerKind::batch_norm) out.push_back({slot.layer.name, &slot.bn});
  }
  return out;
}

std::uint64_t Network::parameter_count() const {
  std::uint64_t n = 0;
  for (const auto& slot : slots_) n += slot.conv.weights.numel() + slot.softmax.numel();
  return n;
}

Tensor make_batch(std::span<const FeatureMatrix* const> features) {
  if (features.empty()) throw ShapeError("make_batch: empty batch");
  const std::size_t T = features[0]->n_frames, F = features[0]->n_coeffs;
  Tensor batch({features.size(), 1, T, F});
  auto out = batch.data();
  for (std::size_t n = 0; n < features.size(); ++n) {
    if (features[n]->n_frames != T || features[n]->n_coeffs != F) {
      throw ShapeError("make_batch: feature matrices differ in shape");
    }
    std::copy(features[n]->values.begin(), features[n]->values.end(), out.begin() + static_cast<std::ptrdiff_t>(n * T * F));
  }
  return batch;
}

}  // namespace kws
