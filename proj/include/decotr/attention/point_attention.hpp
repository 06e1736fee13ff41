#pragma once

#include <cstddef>
#include <string>

#include "decotr/geometry/sampling.hpp"
#include "decotr/nn/layers.hpp"

namespace decotr::attention {

/// Neighbourhood vector cross-attention on a point cloud:
///   delta_ij = theta(p_i - p_j)
///   a_ij     = w(q_i - k_j + delta_ij)
///   out_i    = sum_j softmax_j(a_i)_c * (v_j + delta_ij)_c
/// with the softmax taken per channel over the K neighbours of i. When
/// delta_in_value is false the value term is v_j alone.
struct VectorAttentionLayer {
  nn::Linear query;
  nn::Linear key;
  nn::Linear value;
  nn::Mlp weight_encoder;    // w: C -> C -> C
  nn::Mlp position_encoder;  // theta: 3 -> C -> C
  bool delta_in_value = true;

  static VectorAttentionLayer create(std::size_t channels, nn::Rng& rng, bool delta_in_value = true);
  std::size_t channels() const { return query.in_features(); }

  /// features [N x C], positions [N x 3], neighbours N x K. Returns the
  /// attended features [N x C] (no residual).
  Tensor operator()(const Tensor& features, const Tensor& positions, const geometry::NeighborTable& neighbors) const;
  void collect(const std::string& prefix, nn::ParameterList& out) const;
};

/// Scaled dot-product attention over all other points:
///   out_i = sum_{j != i} softmax_j(<q_i, k_j> / sqrt(C_g)) v_j
struct GlobalAttentionLayer {
  nn::Linear query;
  nn::Linear key;
  nn::Linear value;

  static GlobalAttentionLayer create(std::size_t channels, nn::Rng& rng);
  std::size_t channels() const { return query.in_features(); }

  /// features [M x C_g] with M >= 2, otherwise ContractError.
  Tensor operator()(const Tensor& features) const;
  void collect(const std::string& prefix, nn::ParameterList& out) const;
};

}  // namespace decotr::attention
