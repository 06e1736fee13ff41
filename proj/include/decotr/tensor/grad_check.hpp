#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "decotr/tensor/tensor.hpp"

namespace decotr {

using ScalarFunction = std::function<Tensor(std::span<const Tensor>)>;

struct GradCheckOptions {
  double eps = 1e-6;
  /// Upper bound on probed coordinates per input; 0 checks every coordinate.
  std::size_t max_coordinates_per_input = 0;
  std::uint64_t seed = 0;  // picks the subset when the bound applies
  /// Coordinates where both gradients are below this magnitude are skipped
  /// rather than compared; 0 compares everything. A gradient that vanishes
  /// identically leaves only rounding noise in the central difference.
  double noise_floor = 0.0;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  /// Coordinates whose +/-eps probe crossed a ReLU or |x| kink, or that fell
  /// under the noise floor.
  std::size_t skipped = 0;
};

/// Compares reverse-mode gradients of a scalar function against central
/// differences. Per coordinate the error is
/// |analytic - numeric| / max(|analytic|, |numeric|, 1e-12); the maximum is
/// reported. `inputs` are not modified.
GradCheckResult grad_check(const ScalarFunction& f, const std::vector<Tensor>& inputs,
                           const GradCheckOptions& options = {});

/// Same check over leaf tensors that `f` reads directly, such as model
/// parameters. Each leaf is perturbed in place and restored; existing
/// gradients on the leaves are cleared.
GradCheckResult grad_check_leaves(const std::function<Tensor()>& f, const std::vector<Tensor>& leaves,
                                  const GradCheckOptions& options = {});

}  // namespace decotr
