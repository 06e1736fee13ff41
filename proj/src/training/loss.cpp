#include "decotr/training/loss.hpp"

#include "decotr/errors.hpp"
#include "decotr/tensor/ops.hpp"

namespace decotr::training {

Tensor masked_l1_loss(const Tensor& pred, const geometry::DepthMap& gt) {
  const Shape& shape = pred.shape();
  const bool aligned = shape.size() >= 2 && shape[shape.size() - 2] == gt.height && shape.back() == gt.width &&
                       pred.numel() == gt.size();
  if (!aligned) {
    throw DimensionError("prediction " + shape_string(pred.shape()) + " does not match ground truth " +
                         std::to_string(gt.height) + "x" + std::to_string(gt.width));
  }
  std::vector<std::size_t> valid;
  std::vector<double> target;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (gt.values[i] > 0.0) {
      valid.push_back(i);
      target.push_back(gt.values[i]);
    }
  }
  if (valid.empty()) throw ContractError("masked l1 loss: ground truth has no valid pixel");
  const std::size_t n = valid.size();
  const Tensor picked = gather_rows(reshape(pred, {gt.size(), 1}), valid);
  const Tensor residual = picked - Tensor::from_data({n, 1}, std::move(target));
  return sum(abs(residual)) * (1.0 / static_cast<double>(n));
}

}  // namespace decotr::training
