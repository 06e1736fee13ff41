#include "decotr/tensor/ops.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

#include "decotr/errors.hpp"
#include "decotr/simd/kernels.hpp"

namespace decotr {

using detail::grad_sink;
using detail::ImplPtr;
using detail::make_result;

namespace {

enum class BinaryKind { add, sub, mul, div };

const char* binary_name(BinaryKind kind) {
  switch (kind) {
    case BinaryKind::add:
      return "add";
    case BinaryKind::sub:
      return "sub";
    case BinaryKind::mul:
      return "mul";
    case BinaryKind::div:
      return "div";
  }
  return "?";
}

Tensor binary(BinaryKind kind, const Tensor& a, const Tensor& b) {
  const std::size_t na = a.numel();
  const std::size_t nb = b.numel();
  const bool a_scalar = na == 1;
  const bool b_scalar = nb == 1;
  Shape out_shape;
  if (a.shape() == b.shape()) {
    out_shape = a.shape();
  } else if (b_scalar) {
    out_shape = a.shape();
  } else if (a_scalar) {
    out_shape = b.shape();
  } else {
    throw DimensionError(std::string(binary_name(kind)) + ": shapes " + shape_string(a.shape()) + " and " +
                         shape_string(b.shape()) + " do not broadcast");
  }
  const std::size_t n = shape_numel(out_shape);
  const auto ad = a.data();
  const auto bd = b.data();
  if (kind == BinaryKind::div) {
    if (std::any_of(bd.begin(), bd.end(), [](double v) { return v == 0.0; })) {
      throw DomainError("div: division by exact zero");
    }
  }
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = ad[a_scalar ? 0 : i];
    const double y = bd[b_scalar ? 0 : i];
    switch (kind) {
      case BinaryKind::add:
        out[i] = x + y;
        break;
      case BinaryKind::sub:
        out[i] = x - y;
        break;
      case BinaryKind::mul:
        out[i] = x * y;
        break;
      case BinaryKind::div:
        out[i] = x / y;
        break;
    }
  }
  ImplPtr ia = a.impl();
  ImplPtr ib = b.impl();
  return make_result(binary_name(kind), std::move(out_shape), std::move(out), {a, b},
                     [kind, ia, ib, a_scalar, b_scalar, n](std::span<const double> g) {
                       auto ga = grad_sink(*ia);
                       auto gb = grad_sink(*ib);
                       const auto& av = ia->data;
                       const auto& bv = ib->data;
                       for (std::size_t i = 0; i < n; ++i) {
                         const std::size_t i_a = a_scalar ? 0 : i;
                         const std::size_t i_b = b_scalar ? 0 : i;
                         double da = 0.0;
                         double db = 0.0;
                         switch (kind) {
                           case BinaryKind::add:
                             da = g[i];
                             db = g[i];
                             break;
                           case BinaryKind::sub:
                             da = g[i];
                             db = -g[i];
                             break;
                           case BinaryKind::mul:
                             da = g[i] * bv[i_b];
                             db = g[i] * av[i_a];
                             break;
                           case BinaryKind::div:
                             da = g[i] / bv[i_b];
                             db = -g[i] * av[i_a] / (bv[i_b] * bv[i_b]);
                             break;
                         }
                         if (!ga.empty()) ga[i_a] += da;
                         if (!gb.empty()) gb[i_b] += db;
                       }
                     });
}

// Shape viewed as [outer, extent, inner] around `axis`.
struct AxisSplit {
  std::size_t outer = 1;
  std::size_t extent = 1;
  std::size_t inner = 1;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis) {
  if (axis >= shape.size()) {
    throw IndexError("axis " + std::to_string(axis) + " out of range for " + shape_string(shape));
  }
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

void require_rank(const Tensor& t, std::size_t rank, const char* what) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(what) + ": expected rank " + std::to_string(rank) + ", got " +
                         shape_string(t.shape()));
  }
}

struct ConvGeometry {
  std::size_t channels;
  std::size_t height;
  std::size_t width;
  std::size_t kernel;
  std::size_t stride;
  std::size_t padding;
  std::size_t out_h;
  std::size_t out_w;
};

// cols[(c*k*k + ky*k + kx) * P + oy*out_w + ox] = image[c, oy*s + ky - p, ox*s + kx - p]
void im2col(const double* image, const ConvGeometry& g, double* cols) {
  const std::size_t p_count = g.out_h * g.out_w;
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t ky = 0; ky < g.kernel; ++ky) {
      for (std::size_t kx = 0; kx < g.kernel; ++kx) {
        double* row = cols + ((c * g.kernel + ky) * g.kernel + kx) * p_count;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - static_cast<std::ptrdiff_t>(g.padding);
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) - static_cast<std::ptrdiff_t>(g.padding);
            const bool inside = iy >= 0 && ix >= 0 && iy < static_cast<std::ptrdiff_t>(g.height) &&
                                ix < static_cast<std::ptrdiff_t>(g.width);
            row[oy * g.out_w + ox] = inside ? image[(c * g.height + iy) * g.width + ix] : 0.0;
          }
        }
      }
    }
  }
}

// Adjoint of im2col: accumulates columns back into the image.
void col2im(const double* cols, const ConvGeometry& g, double* image) {
  const std::size_t p_count = g.out_h * g.out_w;
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t ky = 0; ky < g.kernel; ++ky) {
      for (std::size_t kx = 0; kx < g.kernel; ++kx) {
        const double* row = cols + ((c * g.kernel + ky) * g.kernel + kx) * p_count;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - static_cast<std::ptrdiff_t>(g.padding);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.height)) continue;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) - static_cast<std::ptrdiff_t>(g.padding);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.width)) continue;
            image[(c * g.height + iy) * g.width + ix] += row[oy * g.out_w + ox];
          }
        }
      }
    }
  }
}

void check_bias(const Tensor& bias, std::size_t channels, const char* what) {
  if (!bias.defined()) return;
  if (bias.rank() != 1 || bias.dim(0) != channels) {
    throw DimensionError(std::string(what) + ": bias shape " + shape_string(bias.shape()) + " does not match " +
                         std::to_string(channels) + " output channels");
  }
}

std::vector<Tensor> defined_only(std::initializer_list<Tensor> ts) {
  std::vector<Tensor> out;
  for (const Tensor& t : ts) {
    if (t.defined()) out.push_back(t);
  }
  return out;
}

}  // namespace

void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, const double* a,
          const double* b, double* c, bool accumulate) {
  std::vector<double> b_t;
  const double* b_rows = b;
  if (trans_b) {
    // op(B) = B^T with B stored [n x k]; materialize [k x n] rows for axpy.
    b_t.resize(k * n);
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t p = 0; p < k; ++p) b_t[p * n + j] = b[j * k + p];
    }
    b_rows = b_t.data();
  }
  for (std::size_t i = 0; i < m; ++i) {
    std::span<double> c_row(c + i * n, n);
    if (!accumulate) std::fill(c_row.begin(), c_row.end(), 0.0);
    for (std::size_t p = 0; p < k; ++p) {
      const double a_ip = trans_a ? a[p * m + i] : a[i * k + p];
      if (a_ip == 0.0) continue;
      simd::axpy(a_ip, std::span<const double>(b_rows + p * n, n), c_row);
    }
  }
}

Tensor add(const Tensor& a, const Tensor& b) { return binary(BinaryKind::add, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary(BinaryKind::sub, a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary(BinaryKind::mul, a, b); }
Tensor div(const Tensor& a, const Tensor& b) { return binary(BinaryKind::div, a, b); }
Tensor add(const Tensor& a, double b) { return add(a, Tensor::scalar(b)); }
Tensor mul(const Tensor& a, double b) { return mul(a, Tensor::scalar(b)); }

Tensor relu(const Tensor& x) {
  const auto xd = x.data();
  if (detail::kink_probe_active()) detail::kink_probe_mix(xd);
  std::vector<double> out(xd.size());
  for (std::size_t i = 0; i < xd.size(); ++i) out[i] = xd[i] > 0.0 ? xd[i] : 0.0;
  ImplPtr ix = x.impl();
  return make_result("relu", x.shape(), std::move(out), {x}, [ix](std::span<const double> g) {
    auto gx = grad_sink(*ix);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (ix->data[i] > 0.0) gx[i] += g[i];
    }
  });
}

Tensor abs(const Tensor& x) {
  const auto xd = x.data();
  if (detail::kink_probe_active()) detail::kink_probe_mix(xd);
  std::vector<double> out(xd.size());
  for (std::size_t i = 0; i < xd.size(); ++i) out[i] = std::fabs(xd[i]);
  ImplPtr ix = x.impl();
  return make_result("abs", x.shape(), std::move(out), {x}, [ix](std::span<const double> g) {
    auto gx = grad_sink(*ix);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double v = ix->data[i];
      if (v > 0.0) gx[i] += g[i];
      else if (v < 0.0) gx[i] -= g[i];
    }
  });
}

Tensor softplus(const Tensor& x) {
  const auto xd = x.data();
  std::vector<double> out(xd.size());
  for (std::size_t i = 0; i < xd.size(); ++i) {
    const double v = xd[i];
    out[i] = v > 0.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v));
  }
  ImplPtr ix = x.impl();
  return make_result("softplus", x.shape(), std::move(out), {x}, [ix](std::span<const double> g) {
    auto gx = grad_sink(*ix);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double v = ix->data[i];
      const double sigmoid = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
      gx[i] += g[i] * sigmoid;
    }
  });
}

Tensor exp(const Tensor& x) {
  const auto xd = x.data();
  std::vector<double> out(xd.size());
  for (std::size_t i = 0; i < xd.size(); ++i) out[i] = std::exp(xd[i]);
  ImplPtr ix = x.impl();
  auto saved = std::make_shared<std::vector<double>>(out);
  return make_result("exp", x.shape(), std::move(out), {x}, [ix, saved](std::span<const double> g) {
    auto gx = grad_sink(*ix);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * (*saved)[i];
  });
}

Tensor sqrt(const Tensor& x) {
  const auto xd = x.data();
  std::vector<double> out(xd.size());
  for (std::size_t i = 0; i < xd.size(); ++i) {
    if (xd[i] < 0.0) throw DomainError("sqrt of a negative value");
    out[i] = std::sqrt(xd[i]);
  }
  ImplPtr ix = x.impl();
  auto saved = std::make_shared<std::vector<double>>(out);
  return make_result("sqrt", x.shape(), std::move(out), {x}, [ix, saved](std::span<const double> g) {
    auto gx = grad_sink(*ix);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * 0.5 / (*saved)[i];
  });
}

Tensor max(const Tensor& x) {
  const auto xd = x.data();
  const std::size_t best = static_cast<std::size_t>(std::max_element(xd.begin(), xd.end()) - xd.begin());
  if (detail::kink_probe_active()) {
    const std::size_t pick[1] = {best};
    detail::kink_probe_mix_indices(pick);
  }
  ImplPtr ix = x.impl();
  return make_result("max", {1}, {xd[best]}, {x}, [ix, best](std::span<const double> g) {
    auto gx = grad_sink(*ix);
    if (!gx.empty()) gx[best] += g[0];
  });
}

Tensor sum(const Tensor& x) {
  // Neumaier-compensated so that central differences of losses are not
  // dominated by reduction rounding.
  const auto xd = x.data();
  double total = 0.0;
  double compensation = 0.0;
  for (double v : xd) {
    const double t = total + v;
    compensation += std::fabs(total) >= std::fabs(v) ? (total - t) + v : (v - t) + total;
    total = t;
  }
  total += compensation;
  ImplPtr ix = x.impl();
  return make_result("sum", {1}, {total}, {x}, [ix](std::span<const double> g) {
    auto gx = grad_sink(*ix);
    for (double& v : gx) v += g[0];
  });
}

Tensor sum(const Tensor& x, std::size_t axis) {
  const AxisSplit s = split_axis(x.shape(), axis);
  Shape out_shape;
  for (std::size_t i = 0; i < x.rank(); ++i) {
    if (i != axis) out_shape.push_back(x.shape()[i]);
  }
  if (out_shape.empty()) out_shape.push_back(1);
  const auto xd = x.data();
  std::vector<double> out(s.outer * s.inner, 0.0);
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t e = 0; e < s.extent; ++e) {
      const double* src = xd.data() + (o * s.extent + e) * s.inner;
      double* dst = out.data() + o * s.inner;
      for (std::size_t in = 0; in < s.inner; ++in) dst[in] += src[in];
    }
  }
  ImplPtr ix = x.impl();
  return make_result("sum_axis", std::move(out_shape), std::move(out), {x}, [ix, s](std::span<const double> g) {
    auto gx = grad_sink(*ix);
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t e = 0; e < s.extent; ++e) {
        double* dst = gx.data() + (o * s.extent + e) * s.inner;
        const double* src = g.data() + o * s.inner;
        for (std::size_t in = 0; in < s.inner; ++in) dst[in] += src[in];
      }
    }
  });
}

Tensor mean(const Tensor& x) { return mul(sum(x), 1.0 / static_cast<double>(x.numel())); }

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t m = a.dim(0);
  const std::size_t k = a.dim(1);
  const std::size_t n = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul: inner dimensions differ, " + shape_string(a.shape()) + " x " +
                         shape_string(b.shape()));
  }
  std::vector<double> out(m * n);
  gemm(false, false, m, n, k, a.data().data(), b.data().data(), out.data(), false);
  ImplPtr ia = a.impl();
  ImplPtr ib = b.impl();
  return make_result("matmul", {m, n}, std::move(out), {a, b}, [ia, ib, m, n, k](std::span<const double> g) {
    auto ga = grad_sink(*ia);
    auto gb = grad_sink(*ib);
    if (!ga.empty()) gemm(false, true, m, k, n, g.data(), ib->data.data(), ga.data(), true);
    if (!gb.empty()) gemm(true, false, k, n, m, ia->data.data(), g.data(), gb.data(), true);
  });
}

Tensor transpose(const Tensor& x) {
  require_rank(x, 2, "transpose");
  const std::size_t r = x.dim(0);
  const std::size_t c = x.dim(1);
  const auto xd = x.data();
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = xd[i * c + j];
  }
  ImplPtr ix = x.impl();
  return make_result("transpose", {c, r}, std::move(out), {x}, [ix, r, c](std::span<const double> g) {
    auto gx = grad_sink(*ix);
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += g[j * r + i];
    }
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape: " + shape_string(x.shape()) + " to " + shape_string(shape));
  }
  const auto xd = x.data();
  ImplPtr ix = x.impl();
  return make_result("reshape", std::move(shape), std::vector<double>(xd.begin(), xd.end()), {x},
                     [ix](std::span<const double> g) {
                       auto gx = grad_sink(*ix);
                       for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
                     });
}

Tensor add_row_bias(const Tensor& x, const Tensor& bias) {
  require_rank(x, 2, "add_row_bias");
  const std::size_t rows = x.dim(0);
  const std::size_t cols = x.dim(1);
  if (bias.rank() != 1 || bias.dim(0) != cols) {
    throw DimensionError("add_row_bias: bias " + shape_string(bias.shape()) + " for rows of width " +
                         std::to_string(cols));
  }
  const auto xd = x.data();
  const auto bd = bias.data();
  std::vector<double> out(xd.begin(), xd.end());
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) out[i * cols + j] += bd[j];
  }
  ImplPtr ix = x.impl();
  ImplPtr ib = bias.impl();
  return make_result("add_row_bias", x.shape(), std::move(out), {x, bias},
                     [ix, ib, rows, cols](std::span<const double> g) {
                       auto gx = grad_sink(*ix);
                       auto gb = grad_sink(*ib);
                       if (!gx.empty()) {
                         for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
                       }
                       if (!gb.empty()) {
                         for (std::size_t i = 0; i < rows; ++i) {
                           for (std::size_t j = 0; j < cols; ++j) gb[j] += g[i * cols + j];
                         }
                       }
                     });
}

namespace {

void softmax_backward(const std::vector<double>& y, std::span<const double> g, std::span<double> gx,
                      const AxisSplit& s) {
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.extent * s.inner + in;
      double dot = 0.0;
      for (std::size_t e = 0; e < s.extent; ++e) dot += g[base + e * s.inner] * y[base + e * s.inner];
      for (std::size_t e = 0; e < s.extent; ++e) {
        const std::size_t idx = base + e * s.inner;
        gx[idx] += y[idx] * (g[idx] - dot);
      }
    }
  }
}

}  // namespace

Tensor softmax(const Tensor& x, std::size_t axis) {
  const AxisSplit s = split_axis(x.shape(), axis);
  const auto xd = x.data();
  std::vector<double> out(xd.size());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.extent * s.inner + in;
      double mx = xd[base];
      for (std::size_t e = 1; e < s.extent; ++e) mx = std::max(mx, xd[base + e * s.inner]);
      double total = 0.0;
      for (std::size_t e = 0; e < s.extent; ++e) {
        const double v = std::exp(xd[base + e * s.inner] - mx);
        out[base + e * s.inner] = v;
        total += v;
      }
      for (std::size_t e = 0; e < s.extent; ++e) out[base + e * s.inner] /= total;
    }
  }
  ImplPtr ix = x.impl();
  auto saved = std::make_shared<std::vector<double>>(out);
  return make_result("softmax", x.shape(), std::move(out), {x}, [ix, saved, s](std::span<const double> g) {
    auto gx = grad_sink(*ix);
    softmax_backward(*saved, g, gx, s);
  });
}

Tensor masked_softmax_rows(const Tensor& x, const std::vector<bool>& excluded) {
  require_rank(x, 2, "masked_softmax_rows");
  if (excluded.size() != x.numel()) throw DimensionError("masked_softmax_rows: mask size mismatch");
  const std::size_t rows = x.dim(0);
  const std::size_t cols = x.dim(1);
  const auto xd = x.data();
  std::vector<double> out(xd.size(), 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t base = r * cols;
    bool any = false;
    double mx = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      if (excluded[base + c]) continue;
      mx = any ? std::max(mx, xd[base + c]) : xd[base + c];
      any = true;
    }
    if (!any) throw ContractError("masked_softmax_rows: row " + std::to_string(r) + " has no admissible entry");
    double total = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      if (excluded[base + c]) continue;
      out[base + c] = std::exp(xd[base + c] - mx);
      total += out[base + c];
    }
    for (std::size_t c = 0; c < cols; ++c) out[base + c] /= total;
  }
  ImplPtr ix = x.impl();
  auto saved = std::make_shared<std::vector<double>>(out);
  const AxisSplit s{rows, cols, 1};
  return make_result("masked_softmax", x.shape(), std::move(out), {x}, [ix, saved, s](std::span<const double> g) {
    auto gx = grad_sink(*ix);
    softmax_backward(*saved, g, gx, s);
  });
}

Tensor concat(const std::vector<Tensor>& tensors, std::size_t axis) {
  if (tensors.empty()) throw ContractError("concat: no inputs");
  const Shape& first = tensors.front().shape();
  if (axis >= first.size()) throw IndexError("concat: axis out of range");
  Shape out_shape = first;
  out_shape[axis] = 0;
  std::vector<std::size_t> extents;
  for (const Tensor& t : tensors) {
    const Shape& s = t.shape();
    if (s.size() != first.size()) throw DimensionError("concat: rank mismatch");
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i != axis && s[i] != first[i]) {
        throw DimensionError("concat: shapes " + shape_string(first) + " and " + shape_string(s) + " differ off-axis");
      }
    }
    extents.push_back(s[axis]);
    out_shape[axis] += s[axis];
  }
  const AxisSplit so = split_axis(out_shape, axis);
  std::vector<double> out(shape_numel(out_shape));
  std::size_t offset = 0;
  for (std::size_t t = 0; t < tensors.size(); ++t) {
    const auto d = tensors[t].data();
    const std::size_t block = extents[t] * so.inner;
    for (std::size_t o = 0; o < so.outer; ++o) {
      std::copy_n(d.data() + o * block, block, out.data() + o * so.extent * so.inner + offset * so.inner);
    }
    offset += extents[t];
  }
  std::vector<ImplPtr> impls;
  for (const Tensor& t : tensors) impls.push_back(t.impl());
  return make_result("concat", std::move(out_shape), std::move(out), tensors,
                     [impls, extents, so](std::span<const double> g) {
                       std::size_t off = 0;
                       for (std::size_t t = 0; t < impls.size(); ++t) {
                         auto gt = grad_sink(*impls[t]);
                         const std::size_t block = extents[t] * so.inner;
                         if (!gt.empty()) {
                           for (std::size_t o = 0; o < so.outer; ++o) {
                             const double* src = g.data() + o * so.extent * so.inner + off * so.inner;
                             double* dst = gt.data() + o * block;
                             for (std::size_t i = 0; i < block; ++i) dst[i] += src[i];
                           }
                         }
                         off += extents[t];
                       }
                     });
}

Tensor narrow(const Tensor& x, std::size_t axis, std::size_t start, std::size_t length) {
  const AxisSplit s = split_axis(x.shape(), axis);
  if (length == 0 || start + length > s.extent) {
    throw IndexError("narrow: range [" + std::to_string(start) + ", " + std::to_string(start + length) +
                     ") out of extent " + std::to_string(s.extent));
  }
  Shape out_shape = x.shape();
  out_shape[axis] = length;
  const auto xd = x.data();
  std::vector<double> out(s.outer * length * s.inner);
  for (std::size_t o = 0; o < s.outer; ++o) {
    std::copy_n(xd.data() + (o * s.extent + start) * s.inner, length * s.inner, out.data() + o * length * s.inner);
  }
  ImplPtr ix = x.impl();
  return make_result("narrow", std::move(out_shape), std::move(out), {x},
                     [ix, s, start, length](std::span<const double> g) {
                       auto gx = grad_sink(*ix);
                       for (std::size_t o = 0; o < s.outer; ++o) {
                         const double* src = g.data() + o * length * s.inner;
                         double* dst = gx.data() + (o * s.extent + start) * s.inner;
                         for (std::size_t i = 0; i < length * s.inner; ++i) dst[i] += src[i];
                       }
                     });
}

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> indices) {
  if (indices.empty()) throw DimensionError("gather_rows: empty index list");
  const std::size_t rows = x.dim(0);
  const std::size_t width = x.numel() / rows;
  for (std::size_t idx : indices) {
    if (idx >= rows) {
      throw IndexError("gather_rows: index " + std::to_string(idx) + " out of range for " + std::to_string(rows) + " rows");
    }
  }
  Shape out_shape = x.shape();
  out_shape[0] = indices.size();
  const auto xd = x.data();
  std::vector<double> out(indices.size() * width);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    std::copy_n(xd.data() + indices[i] * width, width, out.data() + i * width);
  }
  ImplPtr ix = x.impl();
  auto idx = std::make_shared<std::vector<std::size_t>>(indices.begin(), indices.end());
  return make_result("gather_rows", std::move(out_shape), std::move(out), {x},
                     [ix, idx, width](std::span<const double> g) {
                       auto gx = grad_sink(*ix);
                       for (std::size_t i = 0; i < idx->size(); ++i) {
                         double* dst = gx.data() + (*idx)[i] * width;
                         const double* src = g.data() + i * width;
                         for (std::size_t c = 0; c < width; ++c) dst[c] += src[c];
                       }
                     });
}

Tensor scatter_rows(const Tensor& x, std::span<const std::size_t> indices, std::size_t rows) {
  const std::size_t n = x.dim(0);
  if (indices.size() != n) throw DimensionError("scatter_rows: one index per input row required");
  const std::size_t width = x.numel() / n;
  std::vector<bool> seen(rows, false);
  for (std::size_t idx : indices) {
    if (idx >= rows) throw IndexError("scatter_rows: index " + std::to_string(idx) + " out of range");
    if (seen[idx]) throw ContractError("scatter_rows: duplicate destination row " + std::to_string(idx));
    seen[idx] = true;
  }
  Shape out_shape = x.shape();
  out_shape[0] = rows;
  const auto xd = x.data();
  std::vector<double> out(rows * width, 0.0);
  for (std::size_t i = 0; i < n; ++i) std::copy_n(xd.data() + i * width, width, out.data() + indices[i] * width);
  ImplPtr ix = x.impl();
  auto idx = std::make_shared<std::vector<std::size_t>>(indices.begin(), indices.end());
  return make_result("scatter_rows", std::move(out_shape), std::move(out), {x},
                     [ix, idx, width](std::span<const double> g) {
                       auto gx = grad_sink(*ix);
                       for (std::size_t i = 0; i < idx->size(); ++i) {
                         const double* src = g.data() + (*idx)[i] * width;
                         double* dst = gx.data() + i * width;
                         for (std::size_t c = 0; c < width; ++c) dst[c] += src[c];
                       }
                     });
}

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, Conv2dParams params) {
  require_rank(input, 3, "conv2d input");
  require_rank(weight, 4, "conv2d weight");
  if (params.stride < 1) throw ContractError("conv2d: stride must be >= 1");
  if (params.groups < 1) throw ContractError("conv2d: groups must be >= 1");
  const std::size_t c_in = input.dim(0);
  const std::size_t h = input.dim(1);
  const std::size_t w = input.dim(2);
  const std::size_t c_out = weight.dim(0);
  const std::size_t k = weight.dim(2);
  const std::size_t groups = params.groups;
  if (weight.dim(3) != k) throw DimensionError("conv2d: kernels must be square");
  if (c_in % groups != 0 || c_out % groups != 0 || weight.dim(1) != c_in / groups) {
    throw DimensionError("conv2d: weight " + shape_string(weight.shape()) + " incompatible with " +
                         std::to_string(c_in) + " input channels in " + std::to_string(groups) + " groups");
  }
  if (h + 2 * params.padding < k || w + 2 * params.padding < k) {
    throw DimensionError("conv2d: kernel " + std::to_string(k) + " larger than padded input " + shape_string(input.shape()));
  }
  check_bias(bias, c_out, "conv2d");
  const std::size_t out_h = (h + 2 * params.padding - k) / params.stride + 1;
  const std::size_t out_w = (w + 2 * params.padding - k) / params.stride + 1;
  const std::size_t cig = c_in / groups;
  const std::size_t cog = c_out / groups;
  const std::size_t p_count = out_h * out_w;
  const std::size_t patch = cig * k * k;
  const ConvGeometry geo{cig, h, w, k, params.stride, params.padding, out_h, out_w};

  auto cols = std::make_shared<std::vector<double>>(groups * patch * p_count);
  std::vector<double> out(c_out * p_count);
  const double* xd = input.data().data();
  const double* wd = weight.data().data();
  for (std::size_t g = 0; g < groups; ++g) {
    double* cg = cols->data() + g * patch * p_count;
    im2col(xd + g * cig * h * w, geo, cg);
    gemm(false, false, cog, p_count, patch, wd + g * cog * patch, cg, out.data() + g * cog * p_count, false);
  }
  if (bias.defined()) {
    const auto bd = bias.data();
    for (std::size_t c = 0; c < c_out; ++c) {
      for (std::size_t p = 0; p < p_count; ++p) out[c * p_count + p] += bd[c];
    }
  }
  ImplPtr ix = input.impl();
  ImplPtr iw = weight.impl();
  ImplPtr ib = bias.defined() ? bias.impl() : nullptr;
  return make_result(
      "conv2d", {c_out, out_h, out_w}, std::move(out), defined_only({input, weight, bias}),
      [ix, iw, ib, cols, geo, groups, cog, patch, p_count, c_in](std::span<const double> g) {
        auto gx = grad_sink(*ix);
        auto gw = grad_sink(*iw);
        if (ib) {
          auto gb = grad_sink(*ib);
          if (!gb.empty()) {
            for (std::size_t c = 0; c < gb.size(); ++c) {
              for (std::size_t p = 0; p < p_count; ++p) gb[c] += g[c * p_count + p];
            }
          }
        }
        std::vector<double> dcols;
        if (!gx.empty()) dcols.resize(patch * p_count);
        const std::size_t cig = c_in / groups;
        for (std::size_t grp = 0; grp < groups; ++grp) {
          const double* g_grp = g.data() + grp * cog * p_count;
          const double* c_grp = cols->data() + grp * patch * p_count;
          if (!gw.empty()) gemm(false, true, cog, patch, p_count, g_grp, c_grp, gw.data() + grp * cog * patch, true);
          if (!gx.empty()) {
            gemm(true, false, patch, p_count, cog, iw->data.data() + grp * cog * patch, g_grp, dcols.data(), false);
            col2im(dcols.data(), geo, gx.data() + grp * cig * geo.height * geo.width);
          }
        }
      });
}

Tensor conv_transpose2d(const Tensor& input, const Tensor& weight, const Tensor& bias, std::size_t stride,
                        std::size_t groups) {
  require_rank(input, 3, "conv_transpose2d input");
  require_rank(weight, 4, "conv_transpose2d weight");
  if (stride < 1) throw ContractError("conv_transpose2d: stride must be >= 1");
  if (groups < 1) throw ContractError("conv_transpose2d: groups must be >= 1");
  const std::size_t c_in = input.dim(0);
  const std::size_t h = input.dim(1);
  const std::size_t w = input.dim(2);
  const std::size_t k = weight.dim(2);
  if (weight.dim(3) != k) throw DimensionError("conv_transpose2d: kernels must be square");
  if (weight.dim(0) != c_in || c_in % groups != 0) {
    throw DimensionError("conv_transpose2d: weight " + shape_string(weight.shape()) + " incompatible with " +
                         std::to_string(c_in) + " input channels");
  }
  const std::size_t cig = c_in / groups;
  const std::size_t cog = weight.dim(1);
  const std::size_t c_out = cog * groups;
  check_bias(bias, c_out, "conv_transpose2d");
  const std::size_t out_h = (h - 1) * stride + k;
  const std::size_t out_w = (w - 1) * stride + k;
  const std::size_t hw = h * w;
  const std::size_t patch = cog * k * k;
  // Geometry of the forward convolution that maps the output back to the input grid.
  const ConvGeometry geo{cog, out_h, out_w, k, stride, 0, h, w};

  std::vector<double> out(c_out * out_h * out_w, 0.0);
  std::vector<double> cols(patch * hw);
  const double* xd = input.data().data();
  const double* wd = weight.data().data();
  for (std::size_t g = 0; g < groups; ++g) {
    gemm(true, false, patch, hw, cig, wd + g * cig * patch, xd + g * cig * hw, cols.data(), false);
    col2im(cols.data(), geo, out.data() + g * cog * out_h * out_w);
  }
  const std::size_t plane = out_h * out_w;
  if (bias.defined()) {
    const auto bd = bias.data();
    for (std::size_t c = 0; c < c_out; ++c) {
      for (std::size_t p = 0; p < plane; ++p) out[c * plane + p] += bd[c];
    }
  }
  ImplPtr ix = input.impl();
  ImplPtr iw = weight.impl();
  ImplPtr ib = bias.defined() ? bias.impl() : nullptr;
  return make_result("conv_transpose2d", {c_out, out_h, out_w}, std::move(out), defined_only({input, weight, bias}),
                     [ix, iw, ib, geo, groups, cig, cog, patch, hw, plane](std::span<const double> g) {
                       auto gx = grad_sink(*ix);
                       auto gw = grad_sink(*iw);
                       if (ib) {
                         auto gb = grad_sink(*ib);
                         if (!gb.empty()) {
                           for (std::size_t c = 0; c < gb.size(); ++c) {
                             for (std::size_t p = 0; p < plane; ++p) gb[c] += g[c * plane + p];
                           }
                         }
                       }
                       std::vector<double> gcols(patch * hw);
                       for (std::size_t grp = 0; grp < groups; ++grp) {
                         im2col(g.data() + grp * cog * plane, geo, gcols.data());
                         if (!gx.empty()) {
                           gemm(false, false, cig, hw, patch, iw->data.data() + grp * cig * patch, gcols.data(),
                                gx.data() + grp * cig * hw, true);
                         }
                         if (!gw.empty()) {
                           gemm(false, true, cig, patch, hw, ix->data.data() + grp * cig * hw, gcols.data(),
                                gw.data() + grp * cig * patch, true);
                         }
                       }
                     });
}

Tensor depthwise_separable_conv2d(const Tensor& input, const Tensor& depthwise, const Tensor& depthwise_bias,
                                  const Tensor& pointwise, const Tensor& pointwise_bias, std::size_t stride,
                                  std::size_t padding) {
  require_rank(input, 3, "depthwise_separable_conv2d input");
  require_rank(depthwise, 4, "depthwise kernel");
  require_rank(pointwise, 4, "pointwise kernel");
  const std::size_t channels = input.dim(0);
  if (depthwise.dim(0) != channels || depthwise.dim(1) != 1) {
    throw DimensionError("depthwise_separable_conv2d: need one depthwise kernel per channel, got " +
                         shape_string(depthwise.shape()) + " for " + std::to_string(channels) + " channels");
  }
  if (pointwise.dim(1) != channels || pointwise.dim(2) != 1 || pointwise.dim(3) != 1) {
    throw DimensionError("depthwise_separable_conv2d: pointwise kernels must be [C_out x " +
                         std::to_string(channels) + " x 1 x 1], got " + shape_string(pointwise.shape()));
  }
  const Tensor spatial = conv2d(input, depthwise, depthwise_bias, {stride, padding, channels});
  return conv2d(spatial, pointwise, pointwise_bias, {1, 0, 1});
}

Tensor upsample_nearest(const Tensor& x, std::size_t factor_h, std::size_t factor_w) {
  require_rank(x, 3, "upsample_nearest");
  if (factor_h < 1 || factor_w < 1) throw ContractError("upsample_nearest: factors must be >= 1");
  const std::size_t c = x.dim(0);
  const std::size_t h = x.dim(1);
  const std::size_t w = x.dim(2);
  const std::size_t oh = h * factor_h;
  const std::size_t ow = w * factor_w;
  const auto xd = x.data();
  std::vector<double> out(c * oh * ow);
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t xx = 0; xx < ow; ++xx) {
        out[(ch * oh + y) * ow + xx] = xd[(ch * h + y / factor_h) * w + xx / factor_w];
      }
    }
  }
  ImplPtr ix = x.impl();
  return make_result("upsample_nearest", {c, oh, ow}, std::move(out), {x},
                     [ix, c, h, w, oh, ow, factor_h, factor_w](std::span<const double> g) {
                       auto gx = grad_sink(*ix);
                       for (std::size_t ch = 0; ch < c; ++ch) {
                         for (std::size_t y = 0; y < oh; ++y) {
                           for (std::size_t xx = 0; xx < ow; ++xx) {
                             gx[(ch * h + y / factor_h) * w + xx / factor_w] += g[(ch * oh + y) * ow + xx];
                           }
                         }
                       }
                     });
}

}  // namespace decotr
