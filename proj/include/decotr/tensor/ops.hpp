#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "decotr/tensor/tensor.hpp"

namespace decotr {

// Elementwise arithmetic. Operands must have equal shapes, or one of them
// must hold a single element, which is broadcast.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
/// Throws DomainError if any divisor element is exactly zero.
Tensor div(const Tensor& a, const Tensor& b);

Tensor add(const Tensor& a, double b);
Tensor mul(const Tensor& a, double b);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator+(const Tensor& a, double b) { return add(a, b); }
inline Tensor operator*(const Tensor& a, double b) { return mul(a, b); }
inline Tensor operator*(double a, const Tensor& b) { return mul(b, a); }

/// max(x, 0); the subgradient at exactly 0 is 0.
Tensor relu(const Tensor& x);
/// |x|; the subgradient at exactly 0 is 0.
Tensor abs(const Tensor& x);
/// log(1 + exp(x)), evaluated without overflow.
Tensor softplus(const Tensor& x);
Tensor exp(const Tensor& x);
/// Throws DomainError on negative input.
Tensor sqrt(const Tensor& x);

/// Sum of all elements, shape [1].
Tensor sum(const Tensor& x);
/// Sum along `axis`, which is removed from the shape (rank-1 input gives [1]).
Tensor sum(const Tensor& x, std::size_t axis);
Tensor mean(const Tensor& x);
/// Largest element, shape [1]. The gradient goes to the first maximal element.
Tensor max(const Tensor& x);

/// [M x K] . [K x N] -> [M x N]
Tensor matmul(const Tensor& a, const Tensor& b);
/// 2-D transpose.
Tensor transpose(const Tensor& x);
Tensor reshape(const Tensor& x, Shape shape);

/// x [N x C] + bias [C] added to every row.
Tensor add_row_bias(const Tensor& x, const Tensor& bias);

/// Max-subtracted softmax along `axis`.
Tensor softmax(const Tensor& x, std::size_t axis);
/// Softmax along the last axis of a 2-D tensor where entries with
/// `excluded[i] == true` take no probability mass and output exactly 0.
/// Every row must keep at least one entry.
Tensor masked_softmax_rows(const Tensor& x, const std::vector<bool>& excluded);

Tensor concat(const std::vector<Tensor>& tensors, std::size_t axis);
/// Slice of `length` entries along `axis` starting at `start`.
Tensor narrow(const Tensor& x, std::size_t axis, std::size_t start, std::size_t length);

/// Rows of a tensor whose first axis indexes rows. Backward scatter-adds, so
/// repeated indices accumulate.
Tensor gather_rows(const Tensor& x, std::span<const std::size_t> indices);
/// Inverse placement: output has `rows` rows, row indices[i] receives x row i,
/// others are zero. Indices must be distinct.
Tensor scatter_rows(const Tensor& x, std::span<const std::size_t> indices, std::size_t rows);

struct Conv2dParams {
  std::size_t stride = 1;
  std::size_t padding = 0;
  std::size_t groups = 1;
};

/// Cross-correlation (no kernel flip).
/// input [C_in x H x W], weight [C_out x C_in/groups x k x k], bias [C_out] or undefined.
/// Output spatial size floor((H + 2p - k) / s) + 1.
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, Conv2dParams params);

/// Adjoint of conv2d without padding.
/// input [C_in x H x W], weight [C_in x C_out/groups x k x k], bias [C_out] or undefined.
/// Output spatial size (H - 1) * s + k.
Tensor conv_transpose2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
                        std::size_t stride, std::size_t groups = 1);

/// Depthwise k x k convolution (one kernel per channel) followed by a 1x1
/// pointwise mix. depthwise [C x 1 x k x k], pointwise [C_out x C x 1 x 1].
Tensor depthwise_separable_conv2d(const Tensor& input, const Tensor& depthwise,
                                  const Tensor& depthwise_bias, const Tensor& pointwise,
                                  const Tensor& pointwise_bias, std::size_t stride,
                                  std::size_t padding);

/// Nearest-neighbour upsampling of [C x H x W] by integer factors.
Tensor upsample_nearest(const Tensor& x, std::size_t factor_h, std::size_t factor_w);

/// Plain row-major GEMM on raw buffers: C (+)= op(A) . op(B), with
/// op(A) [M x K] and op(B) [K x N]. Built on the dispatched axpy kernel.
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, const double* a,
          const double* b, double* c, bool accumulate);

}  // namespace decotr
