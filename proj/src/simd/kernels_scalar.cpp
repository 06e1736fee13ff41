#include "decotr/simd/kernels.hpp"

#include <cmath>

namespace decotr::simd::scalar {

void axpy(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void mul_accumulate(const double* x, const double* z, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += x[i] * z[i];
}

void squared_distances(const double* xs, const double* ys, const double* zs, double qx, double qy,
                       double qz, double* out, std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) {
    const double dx = xs[j] - qx;
    const double dy = ys[j] - qy;
    const double dz = zs[j] - qz;
    out[j] = dx * dx + dy * dy + dz * dz;
  }
}

void adam_update(double* param, const double* grad, double* m, double* v, std::size_t n,
                 const AdamCoefficients& c) {
  const double one_minus_b1 = 1.0 - c.beta1;
  const double one_minus_b2 = 1.0 - c.beta2;
  for (std::size_t i = 0; i < n; ++i) {
    const double g = grad[i];
    m[i] = c.beta1 * m[i] + one_minus_b1 * g;
    v[i] = c.beta2 * v[i] + one_minus_b2 * (g * g);
    const double m_hat = m[i] / c.bias_correction1;
    const double v_hat = v[i] / c.bias_correction2;
    param[i] -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
  }
}

}  // namespace decotr::simd::scalar
