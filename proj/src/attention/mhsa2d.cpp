#include "decotr/attention/mhsa2d.hpp"

#include <cmath>

#include "decotr/errors.hpp"
#include "decotr/tensor/ops.hpp"

namespace decotr::attention {

void Mhsa2dConfig::validate() const {
  if (heads == 0 || channels == 0 || height == 0 || width == 0) {
    throw ConfigError("attention heads, channels and size must be positive");
  }
  if (channels % heads != 0) {
    throw ConfigError("attention channels " + std::to_string(channels) + " not divisible by " +
                      std::to_string(heads) + " heads");
  }
}

Mhsa2d Mhsa2d::create(const Mhsa2dConfig& config, nn::Rng& rng) {
  config.validate();
  Mhsa2d m;
  m.config = config;
  m.query = nn::Linear::create(config.channels, config.channels, rng);
  m.key = nn::Linear::create(config.channels, config.channels, rng);
  m.value = nn::Linear::create(config.channels, config.channels, rng);
  return m;
}

Tensor Mhsa2d::operator()(const Tensor& x) const {
  const std::size_t c = config.channels;
  if (x.rank() != 3 || x.dim(0) != c || x.dim(1) != config.height || x.dim(2) != config.width) {
    throw DimensionError("MHSA expects [" + std::to_string(c) + "x" + std::to_string(config.height) + "x" +
                         std::to_string(config.width) + "], got " + shape_string(x.shape()));
  }
  const std::size_t n = config.height * config.width;
  const Tensor tokens = transpose(reshape(x, {c, n}));
  const Tensor q = query(tokens);
  const Tensor k = key(tokens);
  const Tensor v = value(tokens);
  const std::size_t head_dim = c / config.heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));
  std::vector<Tensor> heads;
  heads.reserve(config.heads);
  for (std::size_t h = 0; h < config.heads; ++h) {
    const Tensor qh = narrow(q, 1, h * head_dim, head_dim);
    const Tensor kh = narrow(k, 1, h * head_dim, head_dim);
    const Tensor vh = narrow(v, 1, h * head_dim, head_dim);
    const Tensor weights = softmax(matmul(qh, transpose(kh)) * scale, 1);
    heads.push_back(matmul(weights, vh));
  }
  const Tensor joined = config.heads == 1 ? heads[0] : concat(heads, 1);
  return reshape(transpose(joined), {c, config.height, config.width});
}

void Mhsa2d::collect(const std::string& prefix, nn::ParameterList& out) const {
  query.collect(prefix + ".query", out);
  key.collect(prefix + ".key", out);
  value.collect(prefix + ".value", out);
}

EnhanceBlock EnhanceBlock::create(std::size_t channels, std::size_t height, std::size_t width,
                                  const Mhsa2dConfig& config, nn::Rng& rng) {
  config.validate();
  std::size_t steps = 0;
  std::size_t h = height;
  std::size_t w = width;
  while ((h > config.height || w > config.width) && h % 2 == 0 && w % 2 == 0) {
    h /= 2;
    w /= 2;
    ++steps;
  }
  if (h != config.height || w != config.width) {
    throw ConfigError("cannot reduce " + std::to_string(height) + "x" + std::to_string(width) + " to " +
                      std::to_string(config.height) + "x" + std::to_string(config.width) +
                      " with factor-2 steps");
  }
  EnhanceBlock b;
  b.in_channels = channels;
  b.steps = steps;
  for (std::size_t s = 0; s < steps; ++s) {
    const std::size_t out = s + 1 == steps ? config.channels : channels;
    b.down.push_back(nn::SeparableConv2d::create(channels, out, 3, 2, 1, rng));
  }
  if (steps == 0) {
    b.down.push_back(nn::SeparableConv2d::create(channels, config.channels, 1, 1, 0, rng));
  }
  b.attention = Mhsa2d::create(config, rng);
  b.restore_pointwise = nn::Conv2d::create(config.channels, channels, 1, {}, rng, 1.0);
  for (std::size_t s = 0; s < steps; ++s) {
    b.up.push_back(nn::ConvTranspose2d::create(channels, channels, 2, 2, channels, rng));
  }
  return b;
}

Tensor EnhanceBlock::branch(const Tensor& x) const {
  if (x.rank() != 3 || x.dim(0) != in_channels) {
    throw DimensionError("enhancement block for " + std::to_string(in_channels) + " channels got " +
                         shape_string(x.shape()));
  }
  Tensor y = x;
  for (const auto& d : down) y = d(y);
  y = restore_pointwise(attention(y));
  for (const auto& u : up) y = u(y);
  return y;
}

Tensor EnhanceBlock::operator()(const Tensor& x) const { return branch(x) + x; }

void EnhanceBlock::collect(const std::string& prefix, nn::ParameterList& out) const {
  for (std::size_t i = 0; i < down.size(); ++i) down[i].collect(prefix + ".down" + std::to_string(i), out);
  attention.collect(prefix + ".attention", out);
  restore_pointwise.collect(prefix + ".restore", out);
  for (std::size_t i = 0; i < up.size(); ++i) up[i].collect(prefix + ".up" + std::to_string(i), out);
}

std::vector<Tensor> enhance_pyramid(const std::vector<Tensor>& maps, const std::vector<EnhanceBlock>& blocks) {
  if (maps.size() != blocks.size()) {
    throw ContractError("enhance_pyramid: " + std::to_string(maps.size()) + " maps for " +
                        std::to_string(blocks.size()) + " blocks");
  }
  std::vector<Tensor> out;
  out.reserve(maps.size());
  for (std::size_t i = 0; i < maps.size(); ++i) out.push_back(blocks[i](maps[i]));
  return out;
}

}  // namespace decotr::attention
