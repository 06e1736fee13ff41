#include "decotr/tensor/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "decotr/errors.hpp"

namespace decotr {
namespace {

struct Evaluation {
  double value;
  std::uint64_t signature;
};

Evaluation evaluate(const std::function<Tensor()>& f) {
  NoGradGuard no_grad;
  KinkProbe probe;
  const Tensor out = f();
  if (out.numel() != 1) throw ContractError("grad_check: function must return a scalar");
  return {out.item(), probe.signature()};
}

}  // namespace

GradCheckResult grad_check(const ScalarFunction& f, const std::vector<Tensor>& inputs,
                           const GradCheckOptions& options) {
  std::vector<Tensor> leaves;
  leaves.reserve(inputs.size());
  for (const Tensor& t : inputs) {
    leaves.push_back(Tensor::from_data(t.shape(), std::vector<double>(t.data().begin(), t.data().end()), true));
  }
  return grad_check_leaves([&] { return f(leaves); }, leaves, options);
}

GradCheckResult grad_check_leaves(const std::function<Tensor()>& f, const std::vector<Tensor>& leaves,
                                  const GradCheckOptions& options) {
  if (!(options.eps > 0.0)) throw ContractError("grad_check: eps must be positive");
  for (const Tensor& t : leaves) {
    if (!t.is_leaf() || !t.requires_grad()) throw ContractError("grad_check: inputs must be leaves requiring grad");
  }
  std::vector<Tensor> handles = leaves;
  for (Tensor& t : handles) t.zero_grad();

  std::uint64_t base_signature = 0;
  {
    Tape::current().clear();
    KinkProbe probe;
    const Tensor out = f();
    if (out.numel() != 1) {
      Tape::current().clear();
      throw ContractError("grad_check: function must return a scalar");
    }
    base_signature = probe.signature();
    if (out.node_id().has_value()) {
      backward(out);
    } else {
      Tape::current().clear();
    }
  }

  GradCheckResult result;
  std::mt19937_64 rng(options.seed);
  for (Tensor& leaf : handles) {
    const std::vector<double> analytic = leaf.grad();
    std::vector<std::size_t> coords(leaf.numel());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (options.max_coordinates_per_input > 0 && coords.size() > options.max_coordinates_per_input) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(options.max_coordinates_per_input);
      std::sort(coords.begin(), coords.end());
    }
    std::span<double> values = leaf.mutable_data();
    for (std::size_t c : coords) {
      const double original = values[c];
      // The representable step can differ from eps after rounding; divide by
      // the step actually taken.
      const double up = original + options.eps;
      const double down = original - options.eps;
      Evaluation plus{};
      Evaluation minus{};
      try {
        values[c] = up;
        plus = evaluate(f);
        values[c] = down;
        minus = evaluate(f);
      } catch (...) {
        values[c] = original;
        throw;
      }
      values[c] = original;
      if (plus.signature != base_signature || minus.signature != base_signature) {
        ++result.skipped;
        continue;
      }
      const double numeric = (plus.value - minus.value) / (up - down);
      const double a = analytic[c];
      if (std::max(std::fabs(a), std::fabs(numeric)) < options.noise_floor) {
        ++result.skipped;
        continue;
      }
      const double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-12});
      result.max_rel_error = std::max(result.max_rel_error, std::fabs(a - numeric) / denom);
      ++result.checked;
    }
    leaf.zero_grad();
  }
  return result;
}

}  // namespace decotr
