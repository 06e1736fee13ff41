#include <atomic>
#include <cstdlib>
#include <string_view>

#include "decotr/errors.hpp"
#include "decotr/simd/kernels.hpp"

namespace decotr::simd {
namespace {

struct KernelTable {
  Isa isa;
  void (*axpy)(double, const double*, double*, std::size_t);
  void (*mul_accumulate)(const double*, const double*, double*, std::size_t);
  void (*squared_distances)(const double*, const double*, const double*, double, double, double,
                            double*, std::size_t);
  void (*adam_update)(double*, const double*, double*, double*, std::size_t,
                      const AdamCoefficients&);
};

constexpr KernelTable kScalarTable{Isa::scalar, scalar::axpy, scalar::mul_accumulate,
                                   scalar::squared_distances, scalar::adam_update};
#if defined(DECOTR_HAVE_AVX2_KERNELS)
constexpr KernelTable kAvx2Table{Isa::avx2, avx2::axpy, avx2::mul_accumulate,
                                 avx2::squared_distances, avx2::adam_update};
#endif
#if defined(DECOTR_HAVE_NEON_KERNELS)
constexpr KernelTable kNeonTable{Isa::neon, neon::axpy, neon::mul_accumulate,
                                 neon::squared_distances, neon::adam_update};
#endif

const KernelTable* table_for(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return &kScalarTable;
    case Isa::avx2:
#if defined(DECOTR_HAVE_AVX2_KERNELS)
      if (__builtin_cpu_supports("avx2")) return &kAvx2Table;
#endif
      return nullptr;
    case Isa::neon:
#if defined(DECOTR_HAVE_NEON_KERNELS)
      return &kNeonTable;
#else
      return nullptr;
#endif
  }
  return nullptr;
}

const KernelTable* initial_table() {
  if (const char* env = std::getenv("DECOTR_ISA")) {
    const std::string_view name(env);
    for (Isa isa : {Isa::scalar, Isa::avx2, Isa::neon}) {
      if (name == isa_name(isa)) {
        if (const KernelTable* t = table_for(isa)) return t;
      }
    }
  }
  return table_for(best_available_isa());
}

std::atomic<const KernelTable*>& active_table() {
  static std::atomic<const KernelTable*> table{initial_table()};
  return table;
}

const KernelTable& kernels() { return *active_table().load(std::memory_order_relaxed); }

void check_same_size(std::size_t a, std::size_t b) {
  if (a != b) throw DimensionError("simd kernel: operand lengths differ");
}

}  // namespace

const char* isa_name(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return "scalar";
    case Isa::avx2:
      return "avx2";
    case Isa::neon:
      return "neon";
  }
  return "unknown";
}

bool isa_available(Isa isa) { return table_for(isa) != nullptr; }

Isa best_available_isa() {
  if (isa_available(Isa::avx2)) return Isa::avx2;
  if (isa_available(Isa::neon)) return Isa::neon;
  return Isa::scalar;
}

Isa active_isa() { return kernels().isa; }

void force_isa(Isa isa) {
  const KernelTable* t = table_for(isa);
  if (t == nullptr) throw ContractError(std::string("instruction set not available: ") + isa_name(isa));
  active_table().store(t, std::memory_order_relaxed);
}

void axpy(double a, std::span<const double> x, std::span<double> y) {
  check_same_size(x.size(), y.size());
  kernels().axpy(a, x.data(), y.data(), x.size());
}

void mul_accumulate(std::span<const double> x, std::span<const double> z, std::span<double> y) {
  check_same_size(x.size(), y.size());
  check_same_size(z.size(), y.size());
  kernels().mul_accumulate(x.data(), z.data(), y.data(), y.size());
}

void squared_distances(std::span<const double> xs, std::span<const double> ys,
                       std::span<const double> zs, double qx, double qy, double qz,
                       std::span<double> out) {
  check_same_size(xs.size(), out.size());
  check_same_size(ys.size(), out.size());
  check_same_size(zs.size(), out.size());
  kernels().squared_distances(xs.data(), ys.data(), zs.data(), qx, qy, qz, out.data(), out.size());
}

void adam_update(std::span<double> param, std::span<const double> grad, std::span<double> m,
                 std::span<double> v, const AdamCoefficients& c) {
  check_same_size(grad.size(), param.size());
  check_same_size(m.size(), param.size());
  check_same_size(v.size(), param.size());
  kernels().adam_update(param.data(), grad.data(), m.data(), v.data(), param.size(), c);
}

}  // namespace decotr::simd
