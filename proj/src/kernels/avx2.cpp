#include <immintrin.h>

#include "talkcond/kernels.hpp"

namespace talkcond::kernels::detail {
namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d sh = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void diag_gauss_avx2(const double* x, std::size_t dim, const double* means,
                     const double* inv_vars, const double* gconst,
                     std::size_t n_mix, double* out) {
  for (std::size_t m = 0; m < n_mix; ++m) {
    const double* mu = means + m * dim;
    const double* iv = inv_vars + m * dim;
    __m256d acc = _mm256_setzero_pd();
    std::size_t d = 0;
    for (; d + 4 <= dim; d += 4) {
      const __m256d diff = _mm256_sub_pd(_mm256_loadu_pd(x + d), _mm256_loadu_pd(mu + d));
      acc = _mm256_fmadd_pd(_mm256_mul_pd(diff, diff), _mm256_loadu_pd(iv + d), acc);
    }
    double q = hsum(acc);
    for (; d < dim; ++d) {
      const double diff = x[d] - mu[d];
      q += diff * diff * iv[d];
    }
    out[m] = gconst[m] - 0.5 * q;
  }
}

void accumulate_avx2(double w, const double* x, const double* center,
                     double* s1, double* s2, std::size_t n) {
  const __m256d wv = _mm256_set1_pd(w);
  std::size_t d = 0;
  for (; d + 4 <= n; d += 4) {
    const __m256d diff = _mm256_sub_pd(_mm256_loadu_pd(x + d), _mm256_loadu_pd(center + d));
    const __m256d wd = _mm256_mul_pd(wv, diff);
    _mm256_storeu_pd(s1 + d, _mm256_add_pd(_mm256_loadu_pd(s1 + d), wd));
    _mm256_storeu_pd(s2 + d, _mm256_fmadd_pd(wd, diff, _mm256_loadu_pd(s2 + d)));
  }
  for (; d < n; ++d) {
    const double diff = x[d] - center[d];
    s1[d] += w * diff;
    s2[d] += w * diff * diff;
  }
}

}  // namespace

const KernelTable& avx2_table() {
  static const KernelTable table{dot_avx2, diag_gauss_avx2, accumulate_avx2};
  return table;
}

}  // namespace talkcond::kernels::detail
