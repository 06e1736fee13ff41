#include "decotr/nn/layers.hpp"

#include <cmath>

namespace decotr::nn {

Tensor init_uniform(Shape shape, std::size_t fan_in, double gain, Rng& rng) {
  const double bound = gain * std::sqrt(3.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> data(shape_numel(shape));
  for (double& v : data) v = dist(rng);
  return Tensor::from_data(std::move(shape), std::move(data), true);
}

Linear Linear::create(std::size_t in, std::size_t out, Rng& rng, double gain) {
  return {init_uniform({in, out}, in, gain, rng), Tensor::zeros({out}, true)};
}

Tensor Linear::operator()(const Tensor& x) const { return add_row_bias(matmul(x, weight), bias); }

void Linear::collect(const std::string& prefix, ParameterList& out) const {
  out.emplace_back(prefix + ".weight", weight);
  out.emplace_back(prefix + ".bias", bias);
}

Mlp Mlp::create(std::size_t in, std::size_t hidden, std::size_t out, Rng& rng) {
  Mlp m;
  m.fc1 = Linear::create(in, hidden, rng, std::sqrt(2.0));
  m.fc2 = Linear::create(hidden, out, rng);
  return m;
}

Tensor Mlp::operator()(const Tensor& x) const { return fc2(relu(fc1(x))); }

void Mlp::collect(const std::string& prefix, ParameterList& out) const {
  fc1.collect(prefix + ".fc1", out);
  fc2.collect(prefix + ".fc2", out);
}

Conv2d Conv2d::create(std::size_t in, std::size_t out, std::size_t kernel, Conv2dParams params, Rng& rng,
                      double gain) {
  const std::size_t per_group = in / params.groups;
  Conv2d c;
  c.weight = init_uniform({out, per_group, kernel, kernel}, per_group * kernel * kernel, gain, rng);
  c.bias = Tensor::zeros({out}, true);
  c.params = params;
  return c;
}

Tensor Conv2d::operator()(const Tensor& x) const { return conv2d(x, weight, bias, params); }

void Conv2d::collect(const std::string& prefix, ParameterList& out) const {
  out.emplace_back(prefix + ".weight", weight);
  out.emplace_back(prefix + ".bias", bias);
}

ConvTranspose2d ConvTranspose2d::create(std::size_t in, std::size_t out, std::size_t kernel, std::size_t stride,
                                        std::size_t groups, Rng& rng) {
  ConvTranspose2d c;
  const std::size_t in_per_group = in / groups;
  // Each output pixel receives about in_per_group * (k/s)^2 contributions.
  const std::size_t overlap = std::max<std::size_t>(1, (kernel / stride) * (kernel / stride));
  c.weight = init_uniform({in, out / groups, kernel, kernel}, in_per_group * overlap, 1.0, rng);
  c.bias = Tensor::zeros({out}, true);
  c.stride = stride;
  c.groups = groups;
  return c;
}

Tensor ConvTranspose2d::operator()(const Tensor& x) const { return conv_transpose2d(x, weight, bias, stride, groups); }

void ConvTranspose2d::collect(const std::string& prefix, ParameterList& out) const {
  out.emplace_back(prefix + ".weight", weight);
  out.emplace_back(prefix + ".bias", bias);
}

SeparableConv2d SeparableConv2d::create(std::size_t in, std::size_t out, std::size_t kernel, std::size_t stride,
                                        std::size_t padding, Rng& rng) {
  SeparableConv2d c;
  c.depthwise = init_uniform({in, 1, kernel, kernel}, kernel * kernel, 1.0, rng);
  c.depthwise_bias = Tensor::zeros({in}, true);
  c.pointwise = init_uniform({out, in, 1, 1}, in, 1.0, rng);
  c.pointwise_bias = Tensor::zeros({out}, true);
  c.stride = stride;
  c.padding = padding;
  return c;
}

Tensor SeparableConv2d::operator()(const Tensor& x) const {
  return depthwise_separable_conv2d(x, depthwise, depthwise_bias, pointwise, pointwise_bias, stride, padding);
}

void SeparableConv2d::collect(const std::string& prefix, ParameterList& out) const {
  out.emplace_back(prefix + ".depthwise.weight", depthwise);
  out.emplace_back(prefix + ".depthwise.bias", depthwise_bias);
  out.emplace_back(prefix + ".pointwise.weight", pointwise);
  out.emplace_back(prefix + ".pointwise.bias", pointwise_bias);
}

std::size_t parameter_count(const ParameterList& params) {
  std::size_t n = 0;
  for (const auto& [name, t] : params) n += t.numel();
  return n;
}

}  // namespace decotr::nn
