#include "kws/optim.hpp"

#include <cmath>
#include <string>

#include "kws/error.hpp"

namespace kws {

void sgd_step(std::span<Tensor* const> params, std::span<std::vector<float>> velocity, const SgdConfig& config) {
  if (params.size() != velocity.size()) {
    throw ShapeError("sgd_step: " + std::to_string(params.size()) + " parameters but " +
                     std::to_string(velocity.size()) + " velocity buffers");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Tensor& p = *params[i];
    if (!p.has_grad()) throw Error("sgd_step: parameter " + std::to_string(i) + " has no gradient");
    if (velocity[i].size() != p.numel()) velocity[i].assign(p.numel(), 0.0f);
    for (float g : p.grad()) {
      if (!std::isfinite(g)) throw NumericError("sgd_step: non-finite gradient in parameter " + std::to_string(i));
    }
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto data = params[i]->data();
    const auto grad = params[i]->grad();
    auto& v = velocity[i];
    for (std::size_t k = 0; k < data.size(); ++k) {
      const double step = static_cast<double>(grad[k]) + config.weight_decay * data[k];
      v[k] = static_cast<float>(config.momentum * v[k] + step);
      data[k] = static_cast<float>(data[k] - config.learning_rate * v[k]);
    }
  }
}

}  // namespace kws
