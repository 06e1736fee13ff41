#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "decotr/model/config.hpp"
#include "decotr/tensor/grad_check.hpp"

// Self-verification checks shared by the unit tests, the acceptance runner and
// the `gradcheck` command.
namespace decotr::testing {

inline constexpr double kOpGradTolerance = 1e-5;
inline constexpr double kPipelineGradTolerance = 1e-4;
inline constexpr double kOracleTolerance = 1e-12;

struct CheckResult {
  std::string name;
  double max_error = 0.0;
  double tolerance = 0.0;
  std::size_t cases = 0;  // coordinates or instances compared
  bool passed = false;
};

struct OpCase {
  std::string name;
  std::vector<Tensor> inputs;
  ScalarFunction f;
};

/// One scalar function per differentiable operation.
std::vector<OpCase> differentiable_op_cases();

/// Central-difference checks of every differentiable operation, the attention
/// layers, the 3D stage and the full training loss of `pipeline`.
std::vector<CheckResult> gradient_suite(const model::ModelConfig& pipeline, std::uint64_t seed);

/// Kernels, attention layers, neighbour search, sampling and metrics against
/// straight-loop oracles on `seeds` random instances each.
std::vector<CheckResult> oracle_suite(std::uint64_t seed, std::size_t seeds = 20);

}  // namespace decotr::testing
