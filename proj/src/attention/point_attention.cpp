#include "decotr/attention/point_attention.hpp"

#include <cmath>

#include "decotr/errors.hpp"
#include "decotr/tensor/ops.hpp"

namespace decotr::attention {

VectorAttentionLayer VectorAttentionLayer::create(std::size_t channels, nn::Rng& rng, bool delta_in_value) {
  VectorAttentionLayer l;
  l.query = nn::Linear::create(channels, channels, rng);
  l.key = nn::Linear::create(channels, channels, rng);
  l.value = nn::Linear::create(channels, channels, rng);
  l.weight_encoder = nn::Mlp::create(channels, channels, channels, rng);
  l.position_encoder = nn::Mlp::create(3, channels, channels, rng);
  l.delta_in_value = delta_in_value;
  return l;
}

Tensor VectorAttentionLayer::operator()(const Tensor& features, const Tensor& positions,
                                        const geometry::NeighborTable& neighbors) const {
  const std::size_t c = channels();
  if (features.rank() != 2 || features.dim(1) != c) {
    throw DimensionError("vector attention expects [N x " + std::to_string(c) + "] features, got " +
                         shape_string(features.shape()));
  }
  const std::size_t n = features.dim(0);
  if (positions.rank() != 2 || positions.dim(0) != n || positions.dim(1) != 3) {
    throw DimensionError("positions " + shape_string(positions.shape()) + " do not match " + std::to_string(n) +
                         " points");
  }
  if (neighbors.points != n || neighbors.k == 0 || neighbors.indices.size() != n * neighbors.k) {
    throw DimensionError("neighbour table does not match " + std::to_string(n) + " points");
  }
  const std::size_t k = neighbors.k;
  std::vector<std::size_t> centre(n * k);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < k; ++j) centre[i * k + j] = i;
  }
  for (std::size_t j : neighbors.indices) {
    if (j >= n) throw IndexError("neighbour index " + std::to_string(j) + " out of range");
  }
  const Tensor rel = gather_rows(positions, centre) - gather_rows(positions, neighbors.indices);
  const Tensor delta = position_encoder(rel);
  const Tensor q = gather_rows(query(features), centre);
  const Tensor kj = gather_rows(key(features), neighbors.indices);
  Tensor vj = gather_rows(value(features), neighbors.indices);
  if (delta_in_value) vj = vj + delta;
  const Tensor weights = softmax(reshape(weight_encoder(q - kj + delta), {n, k, c}), 1);
  return sum(weights * reshape(vj, {n, k, c}), 1);
}

void VectorAttentionLayer::collect(const std::string& prefix, nn::ParameterList& out) const {
  query.collect(prefix + ".query", out);
  key.collect(prefix + ".key", out);
  value.collect(prefix + ".value", out);
  weight_encoder.collect(prefix + ".weight_encoder", out);
  position_encoder.collect(prefix + ".position_encoder", out);
}

GlobalAttentionLayer GlobalAttentionLayer::create(std::size_t channels, nn::Rng& rng) {
  if (channels == 0) throw ConfigError("global attention width must be positive");
  GlobalAttentionLayer l;
  l.query = nn::Linear::create(channels, channels, rng);
  l.key = nn::Linear::create(channels, channels, rng);
  l.value = nn::Linear::create(channels, channels, rng);
  return l;
}

Tensor GlobalAttentionLayer::operator()(const Tensor& features) const {
  const std::size_t c = channels();
  if (features.rank() != 2 || features.dim(1) != c) {
    throw DimensionError("global attention expects [M x " + std::to_string(c) + "] features, got " +
                         shape_string(features.shape()));
  }
  const std::size_t m = features.dim(0);
  if (m < 2) throw ContractError("global attention needs at least 2 points");
  std::vector<bool> self(m * m, false);
  for (std::size_t i = 0; i < m; ++i) self[i * m + i] = true;
  const Tensor logits = matmul(query(features), transpose(key(features))) * (1.0 / std::sqrt(static_cast<double>(c)));
  return matmul(masked_softmax_rows(logits, self), value(features));
}

void GlobalAttentionLayer::collect(const std::string& prefix, nn::ParameterList& out) const {
  query.collect(prefix + ".query", out);
  key.collect(prefix + ".key", out);
  value.collect(prefix + ".value", out);
}

}  // namespace decotr::attention
