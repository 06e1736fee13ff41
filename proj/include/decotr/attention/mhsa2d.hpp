#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "decotr/nn/layers.hpp"

namespace decotr::attention {

struct Mhsa2dConfig {
  std::size_t heads = 2;
  std::size_t channels = 128;  // C_k
  std::size_t height = 4;      // H_k
  std::size_t width = 5;       // W_k

  /// Throws ConfigError if a field is zero or channels % heads != 0.
  void validate() const;
};

/// Multi-head self-attention over the pixels of a [C_k x H_k x W_k] map.
/// Each head attends with softmax(q k^T / sqrt(C_k / heads)) v on its slice of
/// channels; head outputs are concatenated back to C_k channels.
struct Mhsa2d {
  Mhsa2dConfig config;
  nn::Linear query;
  nn::Linear key;
  nn::Linear value;

  static Mhsa2d create(const Mhsa2dConfig& config, nn::Rng& rng);
  Tensor operator()(const Tensor& x) const;
  void collect(const std::string& prefix, nn::ParameterList& out) const;
};

/// One scale of the 2D enhancement: summarize to H_k x W_k with stride-2
/// depthwise-separable convolutions, attend, restore with a pointwise conv
/// and depthwise transposed convolutions, then add the input back.
struct EnhanceBlock {
  std::size_t in_channels = 0;
  std::size_t steps = 0;  // number of factor-2 reductions to the attention size
  std::vector<nn::SeparableConv2d> down;
  Mhsa2d attention;
  nn::Conv2d restore_pointwise;
  std::vector<nn::ConvTranspose2d> up;

  /// Throws ConfigError unless height x width equals the attention size
  /// times a common power of two.
  static EnhanceBlock create(std::size_t channels, std::size_t height, std::size_t width,
                             const Mhsa2dConfig& config, nn::Rng& rng);
  /// The attention branch f^A alone, same shape as x.
  Tensor branch(const Tensor& x) const;
  /// f^E = f^A + f
  Tensor operator()(const Tensor& x) const;
  void collect(const std::string& prefix, nn::ParameterList& out) const;
};

/// Applies blocks[i] to maps[i]; shapes are preserved.
std::vector<Tensor> enhance_pyramid(const std::vector<Tensor>& maps, const std::vector<EnhanceBlock>& blocks);

}  // namespace decotr::attention
