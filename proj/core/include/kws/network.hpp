#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "kws/arch.hpp"
#include "kws/frontend.hpp"
#include "kws/ops.hpp"

namespace kws {

struct NamedParameter {
  std::string name;
  Tensor* tensor;
};

struct NamedBatchNorm {
  std::string name;
  BatchNormState* state;
};

/// A built ArchSpec: parameters, batch-norm state, forward and backward passes.
///
/// Conv weights start Kaiming-normal (std sqrt(2 / fan_in)); softmax weights
/// start Uniform(-1/sqrt(C), 1/sqrt(C)). Initialization depends only on the
/// seed.
class Network {
 public:
  Network(ArchSpec spec, std::uint64_t seed);

  const ArchSpec& spec() const { return spec_; }

  /// Class probabilities (N, classes) for input (N, 1, T, F).
  Tensor forward(const Tensor& input, Mode mode);

  struct StepResult {
    double loss = 0.0;
    Tensor probabilities;
  };

  /// Train-mode forward pass plus backward pass; leaves dL/dparam in every
  /// parameter's gradient slot (overwriting previous gradients).
  StepResult forward_backward(const Tensor& input, std::span<const int> labels);

  /// Parameters in layer order; softmax weights last.
  std::vector<NamedParameter> parameters();
  std::vector<NamedBatchNorm> batch_norms();
  std::uint64_t parameter_count() const;

 private:
  struct Slot {
    LayerSpec layer;
    ConvParams conv;      // conv
    BatchNormState bn;    // batch_norm
    Tensor softmax;       // softmax weights (C, K)
  };
  struct Trace;

  Tensor run(const Tensor& input, Mode mode, Trace* trace);

  ArchSpec spec_;
  std::vector<Slot> slots_;
};

/// Stacks feature matrices into an (N, 1, T, F) batch.
Tensor make_batch(std::span<const FeatureMatrix* const> features);

}  // namespace kws
