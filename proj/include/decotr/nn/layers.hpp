#pragma once

#include <cmath>
#include <cstddef>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "decotr/tensor/ops.hpp"
#include "decotr/tensor/tensor.hpp"

namespace decotr::nn {

/// Named trainable tensors in a fixed registration order. Entries alias the
/// layer storage, so in-place updates through them reach the layers.
using ParameterList = std::vector<std::pair<std::string, Tensor>>;

using Rng = std::mt19937_64;

/// Uniform(-bound, bound) leaf with requires_grad set, bound = gain * sqrt(3 / fan_in).
Tensor init_uniform(Shape shape, std::size_t fan_in, double gain, Rng& rng);

/// Fully connected layer on row vectors: [N x in] -> [N x out].
struct Linear {
  Tensor weight;  // [in x out]
  Tensor bias;    // [out]

  static Linear create(std::size_t in, std::size_t out, Rng& rng, double gain = 1.0);
  Tensor operator()(const Tensor& x) const;
  std::size_t in_features() const { return weight.dim(0); }
  std::size_t out_features() const { return weight.dim(1); }
  void collect(const std::string& prefix, ParameterList& out) const;
};

/// fc2(relu(fc1(x)))
struct Mlp {
  Linear fc1;
  Linear fc2;

  static Mlp create(std::size_t in, std::size_t hidden, std::size_t out, Rng& rng);
  Tensor operator()(const Tensor& x) const;
  void collect(const std::string& prefix, ParameterList& out) const;
};

struct Conv2d {
  Tensor weight;  // [C_out x C_in/groups x k x k]
  Tensor bias;    // [C_out]
  Conv2dParams params;

  static Conv2d create(std::size_t in, std::size_t out, std::size_t kernel, Conv2dParams params, Rng& rng,
                       double gain = std::sqrt(2.0));
  Tensor operator()(const Tensor& x) const;
  void collect(const std::string& prefix, ParameterList& out) const;
};

/// Transposed convolution without padding, see conv_transpose2d.
struct ConvTranspose2d {
  Tensor weight;  // [C_in x C_out/groups x k x k]
  Tensor bias;
  std::size_t stride = 1;
  std::size_t groups = 1;

  static ConvTranspose2d create(std::size_t in, std::size_t out, std::size_t kernel, std::size_t stride,
                                std::size_t groups, Rng& rng);
  Tensor operator()(const Tensor& x) const;
  void collect(const std::string& prefix, ParameterList& out) const;
};

/// Depthwise k x k convolution followed by a 1x1 pointwise mix.
struct SeparableConv2d {
  Tensor depthwise;       // [C_in x 1 x k x k]
  Tensor depthwise_bias;  // [C_in]
  Tensor pointwise;       // [C_out x C_in x 1 x 1]
  Tensor pointwise_bias;  // [C_out]
  std::size_t stride = 1;
  std::size_t padding = 0;

  static SeparableConv2d create(std::size_t in, std::size_t out, std::size_t kernel, std::size_t stride,
                                std::size_t padding, Rng& rng);
  Tensor operator()(const Tensor& x) const;
  void collect(const std::string& prefix, ParameterList& out) const;
};

std::size_t parameter_count(const ParameterList& params);

}  // namespace decotr::nn
