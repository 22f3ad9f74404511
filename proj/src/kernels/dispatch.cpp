#include <cstdlib>
#include <string>

#include "zcnas/common/error.hpp"
#include "zcnas/kernels/kernels.hpp"

namespace zc::kernels {

const char* isa_name(Isa isa) {
  switch (isa) {
    case Isa::Scalar: return "scalar";
    case Isa::Avx2: return "avx2";
    case Isa::Avx512: return "avx512";
  }
  return "?";
}

bool isa_supported(Isa isa) {
  switch (isa) {
    case Isa::Scalar: return true;
    case Isa::Avx2:
#if defined(ZCNAS_HAVE_AVX2)
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Isa::Avx512:
#if defined(ZCNAS_HAVE_AVX512)
      return __builtin_cpu_supports("avx512f");
#else
      return false;
#endif
  }
  return false;
}

const KernelSet& kernel_set(Isa isa) {
  if (!isa_supported(isa))
    throw ConfigError(std::string("kernel variant not available: ") + isa_name(isa));
  switch (isa) {
#if defined(ZCNAS_HAVE_AVX2)
    case Isa::Avx2: return detail::avx2_set;
#endif
#if defined(ZCNAS_HAVE_AVX512)
    case Isa::Avx512: return detail::avx512_set;
#endif
    default: return detail::scalar_set;
  }
}

namespace {

const KernelSet& select() {
  if (const char* env = std::getenv("ZCNAS_SIMD")) {
    const std::string want = env;
    if (want == "scalar") return kernel_set(Isa::Scalar);
    if (want == "avx2") return kernel_set(Isa::Avx2);
    if (want == "avx512") return kernel_set(Isa::Avx512);
    throw ConfigError("ZCNAS_SIMD must be one of scalar, avx2, avx512; got " + want);
  }
  // AVX-512 is opt-in via ZCNAS_SIMD.
  if (isa_supported(Isa::Avx2)) return kernel_set(Isa::Avx2);
  return kernel_set(Isa::Scalar);
}

}  // namespace

const KernelSet& active() {
  static const KernelSet& chosen = select();
  return chosen;
}

void gemm(const KernelSet& ks, Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k,
          const double* a, std::size_t lda, const double* b, std::size_t ldb, double* c,
          std::size_t ldc, bool accumulate) {
  if (tb == Trans::No) {
    if (ta == Trans::No)
      ks.gemm_xn(m, n, k, a, lda, 1, b, ldb, c, ldc, accumulate);
    else
      ks.gemm_xn(m, n, k, a, 1, lda, b, ldb, c, ldc, accumulate);
    return;
  }
  if (ta == Trans::Yes) throw Error("gemm: transposed-transposed layout is not supported");
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double s = ks.dot(a + i * lda, b + j * ldb, k);
      c[i * ldc + j] = accumulate ? c[i * ldc + j] + s : s;
    }
  }
}

}  // namespace zc::kernels
