#pragma once

// Numerical checks shared by the unit tests and the acceptance runner.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "kws/arch.hpp"
#include "kws/ops.hpp"

namespace kws::testing {

/// Direct six-loop convolution in double; the reference conv2d is held to.
Tensor conv2d_reference(const Tensor& input, const ConvParams& params);

/// Largest |conv2d - reference| over `trials` random shapes for dilation d.
double conv_oracle_error(Dilation d, int trials, std::uint64_t seed);

struct GradientCheck {
  std::string name;
  double relative_error = 0.0;  // ||analytic - numeric|| / max(norms)
};

/// Central-difference checks of every op's backward pass on random shapes.
/// Convolutions cover each dilation in `dilations` on both axes.
std::vector<GradientCheck> gradient_suite(const std::vector<int>& dilations, std::uint64_t seed);

/// End-to-end check of Network::forward_backward on a small residual spec:
/// one directional derivative per parameter tensor, taken along its gradient.
std::vector<GradientCheck> network_gradient_check(const ArchSpec& spec, std::size_t frames, std::size_t coeffs,
                                                  std::uint64_t seed);

}  // namespace kws::testing

namespace kws::testing {

/// Receptive field measured by back-propagating a single unit of the final
/// feature map to the input through one-channel, all-ones kernels.
ReceptiveField probe_receptive_field(const ArchSpec& spec, std::size_t frames, std::size_t coeffs);

}  // namespace kws::testing
