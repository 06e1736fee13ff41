#include "decotr/training/optimizer.hpp"

#include <cmath>

#include "decotr/errors.hpp"
#include "decotr/simd/kernels.hpp"

namespace decotr::training {

AdamState AdamState::zeros_like(const nn::ParameterList& params) {
  AdamState s;
  for (const auto& [name, t] : params) {
    s.m.emplace_back(t.numel(), 0.0);
    s.v.emplace_back(t.numel(), 0.0);
  }
  return s;
}

void adam_step(const nn::ParameterList& params, AdamState& state, const AdamConfig& config) {
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw DimensionError("optimizer state holds " + std::to_string(state.m.size()) + " entries for " +
                         std::to_string(params.size()) + " parameters");
  }
  ++state.t;
  const double t = static_cast<double>(state.t);
  const simd::AdamCoefficients c{config.lr, config.beta1, config.beta2, config.eps,
                                 1.0 - std::pow(config.beta1, t), 1.0 - std::pow(config.beta2, t)};
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor p = params[i].second;
    if (state.m[i].size() != p.numel() || state.v[i].size() != p.numel()) {
      throw DimensionError("optimizer moments do not match parameter " + params[i].first);
    }
    const std::vector<double> g = p.grad();
    simd::adam_update(p.mutable_data(), g, state.m[i], state.v[i], c);
    p.zero_grad();
  }
}

}  // namespace decotr::training
