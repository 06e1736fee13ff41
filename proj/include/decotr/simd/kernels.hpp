#pragma once

// Data-parallel inner loops used by the tensor engine, KNN and the optimizer.
//
// Every kernel has a scalar reference in `scalar::` and vector variants in
// `avx2::` (x86-64) and `neon::` (aarch64). The active set is picked once at
// startup from CPU features and can be pinned with force_isa() or the
// DECOTR_ISA environment variable ("scalar", "avx2", "neon").
//
// All variants use separate multiply and add (no FMA) and keep per-element
// evaluation order, so their results are bit-identical to the scalar path.

#include <cstddef>
#include <span>

namespace decotr::simd {

enum class Isa { scalar, avx2, neon };

const char* isa_name(Isa isa);

/// Best instruction set supported by this CPU and compiled into the binary.
Isa best_available_isa();

bool isa_available(Isa isa);

Isa active_isa();

/// Pins the dispatch table. Throws ContractError if `isa` is unavailable here.
void force_isa(Isa isa);

/// Bias-corrected Adam coefficients shared by every parameter in one step.
struct AdamCoefficients {
  double lr;
  double beta1;
  double beta2;
  double eps;
  double bias_correction1;  // 1 - beta1^t
  double bias_correction2;  // 1 - beta2^t
};

// y[i] += a * x[i]
void axpy(double a, std::span<const double> x, std::span<double> y);

// y[i] += x[i] * z[i]
void mul_accumulate(std::span<const double> x, std::span<const double> z, std::span<double> y);

// out[j] = (xs[j]-qx)^2 + (ys[j]-qy)^2 + (zs[j]-qz)^2, evaluated left to right.
void squared_distances(std::span<const double> xs, std::span<const double> ys,
                       std::span<const double> zs, double qx, double qy, double qz,
                       std::span<double> out);

// One Adam update over a flat parameter block.
void adam_update(std::span<double> param, std::span<const double> grad, std::span<double> m,
                 std::span<double> v, const AdamCoefficients& c);

namespace scalar {
void axpy(double a, const double* x, double* y, std::size_t n);
void mul_accumulate(const double* x, const double* z, double* y, std::size_t n);
void squared_distances(const double* xs, const double* ys, const double* zs, double qx, double qy,
                       double qz, double* out, std::size_t n);
void adam_update(double* param, const double* grad, double* m, double* v, std::size_t n,
                 const AdamCoefficients& c);
}  // namespace scalar

#if defined(__x86_64__) || defined(_M_X64)
#define DECOTR_HAVE_AVX2_KERNELS 1
namespace avx2 {
void axpy(double a, const double* x, double* y, std::size_t n);
void mul_accumulate(const double* x, const double* z, double* y, std::size_t n);
void squared_distances(const double* xs, const double* ys, const double* zs, double qx, double qy,
                       double qz, double* out, std::size_t n);
void adam_update(double* param, const double* grad, double* m, double* v, std::size_t n,
                 const AdamCoefficients& c);
}  // namespace avx2
#endif

#if defined(__aarch64__)
#define DECOTR_HAVE_NEON_KERNELS 1
namespace neon {
void axpy(double a, const double* x, double* y, std::size_t n);
void mul_accumulate(const double* x, const double* z, double* y, std::size_t n);
void squared_distances(const double* xs, const double* ys, const double* zs, double qx, double qy,
                       double qz, double* out, std::size_t n);
void adam_update(double* param, const double* grad, double* m, double* v, std::size_t n,
                 const AdamCoefficients& c);
}  // namespace neon
#endif

}  // namespace decotr::simd
