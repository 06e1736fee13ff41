#pragma once

#include <cstdint>
#include <vector>

#include "decotr/nn/layers.hpp"

namespace decotr::training {

struct AdamConfig {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::uint64_t t = 0;

  /// Zero moments shaped like `params`.
  static AdamState zeros_like(const nn::ParameterList& params);
};

/// One bias-corrected Adam update of every parameter from its accumulated
/// gradient (zero when absent). No weight decay. Gradients are cleared.
void adam_step(const nn::ParameterList& params, AdamState& state, const AdamConfig& config);

}  // namespace decotr::training
