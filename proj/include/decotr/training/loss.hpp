#pragma once

#include "decotr/geometry/camera.hpp"
#include "decotr/tensor/tensor.hpp"

namespace decotr::training {

/// Mean of |gt - pred| over pixels with gt > 0. pred is [H x W] or
/// [1 x H x W]. Predictions at invalid pixels do not
/// enter the graph. Throws ContractError if gt has no valid pixel.
Tensor masked_l1_loss(const Tensor& pred, const geometry::DepthMap& gt);

}  // namespace decotr::training
