#include <gtest/gtest.h>

#include <cmath>

#include "decotr/errors.hpp"
#include "decotr/tensor/ops.hpp"
#include "random.hpp"
#include "tensor_oracles.hpp"

namespace decotr {
namespace {

using testing::random_tensor;
using testing::random_values;

std::vector<double> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

void expect_near_all(const std::vector<double>& a, const std::vector<double>& b, double tol) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], tol) << "at " << i;
}

TEST(Elementwise, AddAndRelu) {
  const Tensor a = Tensor::from_data({2}, {1, 2});
  const Tensor b = Tensor::from_data({2}, {3, 4});
  EXPECT_EQ(values(a + b), (std::vector<double>{4, 6}));
  EXPECT_EQ(values(relu(Tensor::from_data({3}, {-1, 0, 2}))), (std::vector<double>{0, 0, 2}));
}

TEST(Elementwise, ScalarBroadcastBothSides) {
  const Tensor a = Tensor::from_data({2, 2}, {1, 2, 3, 4});
  EXPECT_EQ(values(a * 2.0), (std::vector<double>{2, 4, 6, 8}));
  EXPECT_EQ(values(sub(Tensor::scalar(10), a)), (std::vector<double>{9, 8, 7, 6}));
}

TEST(Elementwise, ShapeMismatchAndZeroDivision) {
  EXPECT_THROW(add(Tensor::zeros({2}), Tensor::zeros({3})), DimensionError);
  EXPECT_THROW(div(Tensor::full({2}, 1.0), Tensor::from_data({2}, {1.0, 0.0})), DomainError);
}

TEST(Matmul, IdentityAndHandExample) {
  std::vector<double> eye(9, 0.0);
  eye[0] = eye[4] = eye[8] = 1.0;
  const Tensor b = random_tensor({3, 2}, 3);
  EXPECT_EQ(values(matmul(Tensor::from_data({3, 3}, eye), b)), values(b));
  const Tensor out = matmul(Tensor::from_data({2, 2}, {1, 2, 3, 4}), Tensor::from_data({2, 1}, {1, 1}));
  EXPECT_EQ(out.shape(), (Shape{2, 1}));
  EXPECT_EQ(values(out), (std::vector<double>{3, 7}));
}

TEST(Matmul, AgreesWithTripleLoopOracle) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Tensor a = random_tensor({5, 7}, seed);
    const Tensor b = random_tensor({7, 3}, seed + 100);
    expect_near_all(values(matmul(a, b)), testing::matmul_oracle(values(a), values(b), 5, 7, 3), 1e-12);
  }
}

TEST(Matmul, InnerDimensionMismatch) {
  EXPECT_THROW(matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3})), DimensionError);
}

TEST(Softmax, HandExamples) {
  expect_near_all(values(softmax(Tensor::from_data({2}, {0, 0}), 0)), {0.5, 0.5}, 0);
  expect_near_all(values(softmax(Tensor::from_data({2}, {1000, 1000}), 0)), {0.5, 0.5}, 0);
  expect_near_all(values(softmax(Tensor::from_data({2}, {0, std::log(3.0)}), 0)), {0.25, 0.75}, 1e-15);
}

TEST(Softmax, SlicesSumToOneAndShiftInvariant) {
  const Tensor x = random_tensor({3, 5, 4}, 21, -5, 5);
  for (std::size_t axis = 0; axis < 3; ++axis) {
    const Tensor y = softmax(x, axis);
    const Tensor sums = sum(y, axis);
    for (double s : sums.data()) EXPECT_NEAR(s, 1.0, 1e-12);
    for (double v : y.data()) EXPECT_GT(v, 0.0);
    expect_near_all(values(softmax(x + 7.25, axis)), values(y), 1e-12);
  }
}

TEST(Softmax, MaskedRowsGiveZeroMassToExcluded) {
  const Tensor x = Tensor::from_data({2, 3}, {1, 2, 3, 0, 0, 0});
  const Tensor y = masked_softmax_rows(x, {false, true, false, true, false, false});
  EXPECT_EQ(y[1], 0.0);
  EXPECT_EQ(y[3], 0.0);
  EXPECT_NEAR(y[0] + y[2], 1.0, 1e-15);
  EXPECT_NEAR(y[4], 0.5, 1e-15);
  EXPECT_THROW(masked_softmax_rows(x, {true, true, true, false, false, false}), ContractError);
}

TEST(Conv2d, IdentityKernelAndCounting) {
  const Tensor x = random_tensor({2, 4, 5}, 5);
  std::vector<double> w{1, 0, 0, 1};
  const Tensor identity = conv2d(x, Tensor::from_data({2, 2, 1, 1}, w), Tensor(), {});
  EXPECT_EQ(values(identity), values(x));

  const Tensor ones = conv2d(Tensor::full({1, 5, 5}, 1.0), Tensor::full({1, 1, 3, 3}, 1.0), Tensor(), {});
  EXPECT_EQ(ones.shape(), (Shape{1, 3, 3}));
  for (double v : ones.data()) EXPECT_EQ(v, 9.0);
}

TEST(Conv2d, OutputSizeFormula) {
  const Tensor y = conv2d(Tensor::zeros({1, 9, 7}), Tensor::zeros({2, 1, 3, 3}), Tensor(), {2, 1, 1});
  EXPECT_EQ(y.shape(), (Shape{2, (9 + 2 - 3) / 2 + 1, (7 + 2 - 3) / 2 + 1}));
}

TEST(Conv2d, AgreesWithDirectLoopOracle) {
  struct Case {
    std::size_t c_in, c_out, h, w, k, stride, pad, groups;
  };
  const std::vector<Case> cases{{3, 4, 7, 6, 3, 1, 1, 1}, {2, 3, 8, 8, 3, 2, 0, 1}, {4, 4, 9, 5, 3, 2, 1, 4},
                                {4, 6, 6, 7, 2, 1, 0, 2}, {1, 2, 16, 16, 5, 3, 2, 1}};
  std::uint64_t seed = 40;
  for (const Case& c : cases) {
    const Tensor x = random_tensor({c.c_in, c.h, c.w}, ++seed);
    const Tensor wt = random_tensor({c.c_out, c.c_in / c.groups, c.k, c.k}, ++seed);
    const Tensor b = random_tensor({c.c_out}, ++seed);
    std::size_t oh = 0, ow = 0;
    const auto expected = testing::conv2d_oracle(values(x), c.c_in, c.h, c.w, values(wt), values(b), c.c_out, c.k,
                                                 c.stride, c.pad, c.groups, oh, ow);
    const Tensor y = conv2d(x, wt, b, {c.stride, c.pad, c.groups});
    EXPECT_EQ(y.shape(), (Shape{c.c_out, oh, ow}));
    expect_near_all(values(y), expected, 1e-12);
  }
}

TEST(Conv2d, KernelLargerThanPaddedInput) {
  EXPECT_THROW(conv2d(Tensor::zeros({1, 2, 2}), Tensor::zeros({1, 1, 5, 5}), Tensor(), {1, 1, 1}), DimensionError);
}

TEST(DepthwiseSeparable, IdentityKernels) {
  const Tensor x = random_tensor({3, 4, 4}, 8);
  std::vector<double> pw(9, 0.0);
  pw[0] = pw[4] = pw[8] = 1.0;
  const Tensor y = depthwise_separable_conv2d(x, Tensor::full({3, 1, 1, 1}, 1.0), Tensor(),
                                              Tensor::from_data({3, 3, 1, 1}, pw), Tensor(), 1, 0);
  EXPECT_EQ(values(y), values(x));
}

TEST(DepthwiseSeparable, StrideFourShape) {
  const Tensor y = depthwise_separable_conv2d(random_tensor({8, 16, 16}, 1), random_tensor({8, 1, 3, 3}, 2), Tensor(),
                                              random_tensor({8, 8, 1, 1}, 3), Tensor(), 4, 1);
  EXPECT_EQ(y.shape(), (Shape{8, 4, 4}));
}

TEST(DepthwiseSeparable, EqualsComposedGenericConvolutions) {
  const std::size_t c = 3, c_out = 5;
  const Tensor x = random_tensor({c, 9, 8}, 30);
  const Tensor dw = random_tensor({c, 1, 3, 3}, 31);
  const Tensor db = random_tensor({c}, 32);
  const Tensor pw = random_tensor({c_out, c, 1, 1}, 33);
  const Tensor pb = random_tensor({c_out}, 34);
  // Dense equivalent of the depthwise stage: block-diagonal [c x c x 3 x 3] kernel.
  std::vector<double> dense(c * c * 9, 0.0);
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t t = 0; t < 9; ++t) dense[(ch * c + ch) * 9 + t] = dw[ch * 9 + t];
  const Tensor composed =
      conv2d(conv2d(x, Tensor::from_data({c, c, 3, 3}, dense), db, {2, 1, 1}), pw, pb, {1, 0, 1});
  expect_near_all(values(depthwise_separable_conv2d(x, dw, db, pw, pb, 2, 1)), values(composed), 1e-12);
}

TEST(DepthwiseSeparable, ChannelMismatch) {
  EXPECT_THROW(depthwise_separable_conv2d(Tensor::zeros({3, 4, 4}), Tensor::zeros({2, 1, 3, 3}), Tensor(),
                                          Tensor::zeros({3, 3, 1, 1}), Tensor(), 1, 1),
               DimensionError);
}

TEST(ConvTranspose2d, UnitKernelIsIdentity) {
  const Tensor x = random_tensor({1, 3, 4}, 9);
  EXPECT_EQ(values(conv_transpose2d(x, Tensor::full({1, 1, 1, 1}, 1.0), Tensor(), 1)), values(x));
}

TEST(ConvTranspose2d, SizeFormulaAndOracle) {
  const Tensor y = conv_transpose2d(Tensor::zeros({2, 4, 4}), Tensor::zeros({2, 3, 4, 4}), Tensor(), 4);
  EXPECT_EQ(y.shape(), (Shape{3, 16, 16}));

  const Tensor x = random_tensor({4, 3, 5}, 50);
  const Tensor w = random_tensor({4, 3, 3, 3}, 51);
  const Tensor b = random_tensor({6}, 52);
  const auto expected = testing::conv_transpose2d_oracle(values(x), 4, 3, 5, values(w), values(b), 6, 3, 2, 2);
  expect_near_all(values(conv_transpose2d(x, w, b, 2, 2)), expected, 1e-12);
}

TEST(ConvTranspose2d, IsAdjointOfConv2d) {
  // <conv(x), y> == <x, conv_T(y)> with the same weight tensor.
  const Tensor x = random_tensor({2, 8, 8}, 60);
  const Tensor w = random_tensor({3, 2, 2, 2}, 61);
  const Tensor y = random_tensor({3, 4, 4}, 62);
  const double lhs = sum(conv2d(x, w, Tensor(), {2, 0, 1}) * y).item();
  const double rhs = sum(x * conv_transpose2d(y, w, Tensor(), 2)).item();
  EXPECT_NEAR(lhs, rhs, 1e-12);
}

TEST(Structural, ConcatGatherNarrow) {
  EXPECT_EQ(values(concat({Tensor::scalar(1), Tensor::scalar(2)}, 0)), (std::vector<double>{1, 2}));
  const Tensor eye = Tensor::from_data({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  const std::vector<std::size_t> idx{2, 0};
  EXPECT_EQ(values(gather_rows(eye, idx)), (std::vector<double>{0, 0, 1, 1, 0, 0}));
  const Tensor m = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(values(narrow(m, 1, 1, 2)), (std::vector<double>{2, 3, 5, 6}));
  EXPECT_EQ(values(concat({m, m}, 1)), (std::vector<double>{1, 2, 3, 1, 2, 3, 4, 5, 6, 4, 5, 6}));
  EXPECT_EQ(values(transpose(m)), (std::vector<double>{1, 4, 2, 5, 3, 6}));
}

TEST(Structural, IndexErrors) {
  const std::vector<std::size_t> bad{3};
  EXPECT_THROW(gather_rows(Tensor::zeros({3, 2}), bad), IndexError);
  EXPECT_THROW(scatter_rows(Tensor::zeros({1, 2}), bad, 3), IndexError);
  EXPECT_THROW(concat({Tensor::zeros({2, 2}), Tensor::zeros({3, 3})}, 0), DimensionError);
  EXPECT_THROW(narrow(Tensor::zeros({2, 2}), 1, 1, 2), IndexError);
}

TEST(Structural, ScatterInvertsGather) {
  const Tensor x = random_tensor({4, 3}, 70);
  const std::vector<std::size_t> idx{3, 0, 2};
  const Tensor round = gather_rows(scatter_rows(gather_rows(x, idx), idx, 4), idx);
  EXPECT_EQ(values(round), values(gather_rows(x, idx)));
}

TEST(Structural, UpsampleNearest) {
  const Tensor y = upsample_nearest(Tensor::from_data({1, 1, 2}, {1, 2}), 2, 2);
  EXPECT_EQ(values(y), (std::vector<double>{1, 1, 2, 2, 1, 1, 2, 2}));
}

TEST(Forward, FiniteInputsGiveFiniteOutputs) {
  const Tensor x = random_tensor({4, 6}, 80, -800, 800);
  for (const Tensor& y : {softmax(x, 1), softplus(x), relu(x), abs(x), mean(x * x)}) {
    for (double v : y.data()) EXPECT_TRUE(std::isfinite(v));
  }
}

}  // namespace
}  // namespace decotr
