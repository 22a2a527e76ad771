#pragma once

#include <span>
#include <vector>

#include "kws/tensor.hpp"

namespace kws {

struct SgdConfig {
  double learning_rate = 0.1;
  double momentum = 0.9;
  double weight_decay = 1e-5;
};

/// Classical (non-Nesterov) momentum SGD with L2 weight decay:
///   v <- momentum * v + (grad + weight_decay * param)
///   param <- param - lr * v
///
/// Every tensor in `params` must carry a gradient, and `velocity` holds one
/// buffer per parameter tensor. Throws NumericError, leaving every parameter
/// untouched, if any gradient is non-finite.
void sgd_step(std::span<Tensor* const> params, std::span<std::vector<float>> velocity, const SgdConfig& config);

}  // namespace kws
