// Compiled with -mavx512f; only reached after a CPUID check.
#include <immintrin.h>

#include "zcnas/kernels/kernels.hpp"

namespace zc::kernels::detail {
namespace {

double dot_avx512(const double* a, const double* b, std::size_t n) {
  __m512d s0 = _mm512_setzero_pd(), s1 = _mm512_setzero_pd();
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    s0 = _mm512_fmadd_pd(_mm512_loadu_pd(a + i), _mm512_loadu_pd(b + i), s0);
    s1 = _mm512_fmadd_pd(_mm512_loadu_pd(a + i + 8), _mm512_loadu_pd(b + i + 8), s1);
  }
  for (; i + 8 <= n; i += 8) s0 = _mm512_fmadd_pd(_mm512_loadu_pd(a + i), _mm512_loadu_pd(b + i), s0);
  if (i < n) {
    const __mmask8 mask = static_cast<__mmask8>((1u << (n - i)) - 1u);
    s1 = _mm512_fmadd_pd(_mm512_maskz_loadu_pd(mask, a + i), _mm512_maskz_loadu_pd(mask, b + i), s1);
  }
  return _mm512_reduce_add_pd(_mm512_add_pd(s0, s1));
}

void axpy_avx512(double alpha, const double* x, double* y, std::size_t n) {
  const __m512d va = _mm512_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm512_storeu_pd(y + i, _mm512_fmadd_pd(va, _mm512_loadu_pd(x + i), _mm512_loadu_pd(y + i)));
  if (i < n) {
    const __mmask8 mask = static_cast<__mmask8>((1u << (n - i)) - 1u);
    const __m512d r =
        _mm512_fmadd_pd(va, _mm512_maskz_loadu_pd(mask, x + i), _mm512_maskz_loadu_pd(mask, y + i));
    _mm512_mask_storeu_pd(y + i, mask, r);
  }
}

// 4x16 register tile.
void gemm_xn_avx512(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t ars,
                    std::size_t acs, const double* b, std::size_t ldb, double* c, std::size_t ldc,
                    bool accumulate) {
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) {
    std::size_t j = 0;
    for (; j + 16 <= n; j += 16) {
      __m512d acc[4][2];
      for (int r = 0; r < 4; ++r) {
        double* crow = c + (i + r) * ldc + j;
        acc[r][0] = accumulate ? _mm512_loadu_pd(crow) : _mm512_setzero_pd();
        acc[r][1] = accumulate ? _mm512_loadu_pd(crow + 8) : _mm512_setzero_pd();
      }
      for (std::size_t p = 0; p < k; ++p) {
        const double* brow = b + p * ldb + j;
        const __m512d b0 = _mm512_loadu_pd(brow);
        const __m512d b1 = _mm512_loadu_pd(brow + 8);
        for (int r = 0; r < 4; ++r) {
          const __m512d av = _mm512_set1_pd(a[(i + r) * ars + p * acs]);
          acc[r][0] = _mm512_fmadd_pd(av, b0, acc[r][0]);
          acc[r][1] = _mm512_fmadd_pd(av, b1, acc[r][1]);
        }
      }
      for (int r = 0; r < 4; ++r) {
        double* crow = c + (i + r) * ldc + j;
        _mm512_storeu_pd(crow, acc[r][0]);
        _mm512_storeu_pd(crow + 8, acc[r][1]);
      }
    }
    if (j < n) {
      for (std::size_t r = 0; r < 4; ++r) {
        double* crow = c + (i + r) * ldc;
        if (!accumulate)
          for (std::size_t jj = j; jj < n; ++jj) crow[jj] = 0.0;
        for (std::size_t p = 0; p < k; ++p)
          axpy_avx512(a[(i + r) * ars + p * acs], b + p * ldb + j, crow + j, n - j);
      }
    }
  }
  for (; i < m; ++i) {
    double* crow = c + i * ldc;
    if (!accumulate)
      for (std::size_t j = 0; j < n; ++j) crow[j] = 0.0;
    for (std::size_t p = 0; p < k; ++p) axpy_avx512(a[i * ars + p * acs], b + p * ldb, crow, n);
  }
}

}  // namespace

const KernelSet avx512_set{Isa::Avx512, "avx512", dot_avx512, axpy_avx512, gemm_xn_avx512};

}  // namespace zc::kernels::detail
