#pragma once
// Dense double-precision kernels used by the engine's conv/linear layers.
//
// Every kernel has a scalar reference implementation and, on x86-64,
// AVX2+FMA and AVX-512 variants. The variant is chosen once at runtime from
// CPUID (override with ZCNAS_SIMD=scalar|avx2|avx512). Variants agree with
// the reference to rounding; results are bit-stable for a fixed variant.

#include <cstddef>

namespace zc::kernels {

enum class Isa { Scalar, Avx2, Avx512 };
enum class Trans { No, Yes };

struct KernelSet {
  Isa isa;
  const char* name;
  // sum_i a[i] * b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // C[m x n] (+)= A' B where A'[i,k] = a[i*ars + k*acs] and B is row-major k x n.
  void (*gemm_xn)(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t ars,
                  std::size_t acs, const double* b, std::size_t ldb, double* c, std::size_t ldc,
                  bool accumulate);
};

const char* isa_name(Isa isa);
bool isa_supported(Isa isa);

// Throws zc::ConfigError when the ISA is not available on this CPU/build.
const KernelSet& kernel_set(Isa isa);

// Process-wide selection; immutable after first use.
const KernelSet& active();

// C[m x n] (+)= op(A) op(B), row-major with leading dimensions.
// TT is not needed by the engine and is rejected.
void gemm(const KernelSet& ks, Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k,
          const double* a, std::size_t lda, const double* b, std::size_t ldb, double* c,
          std::size_t ldc, bool accumulate);

inline void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k, const double* a,
                 std::size_t lda, const double* b, std::size_t ldb, double* c, std::size_t ldc,
                 bool accumulate) {
  gemm(active(), ta, tb, m, n, k, a, lda, b, ldb, c, ldc, accumulate);
}

// Generic reference used for non-double scalars (dual numbers, log-magnitudes).
template <class T>
void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k, const T* a,
          std::size_t lda, const T* b, std::size_t ldb, T* c, std::size_t ldc, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      T s = accumulate ? c[i * ldc + j] : T(0.0);
      for (std::size_t p = 0; p < k; ++p) {
        const T& av = ta == Trans::No ? a[i * lda + p] : a[p * lda + i];
        const T& bv = tb == Trans::No ? b[p * ldb + j] : b[j * ldb + p];
        s += av * bv;
      }
      c[i * ldc + j] = s;
    }
  }
}

namespace detail {
extern const KernelSet scalar_set;
#if defined(ZCNAS_HAVE_AVX2)
extern const KernelSet avx2_set;
#endif
#if defined(ZCNAS_HAVE_AVX512)
extern const KernelSet avx512_set;
#endif
}  // namespace detail

}  // namespace zc::kernels
