#include <arm_neon.h>

#include "talkcond/kernels.hpp"

namespace talkcond::kernels::detail {
namespace {

double dot_neon(const double* a, const double* b, std::size_t n) {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
    acc1 = vfmaq_f64(acc1, vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
  }
  double s = vaddvq_f64(vaddq_f64(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void diag_gauss_neon(const double* x, std::size_t dim, const double* means,
                     const double* inv_vars, const double* gconst,
                     std::size_t n_mix, double* out) {
  for (std::size_t m = 0; m < n_mix; ++m) {
    const double* mu = means + m * dim;
    const double* iv = inv_vars + m * dim;
    float64x2_t acc = vdupq_n_f64(0.0);
    std::size_t d = 0;
    for (; d + 2 <= dim; d += 2) {
      const float64x2_t diff = vsubq_f64(vld1q_f64(x + d), vld1q_f64(mu + d));
      acc = vfmaq_f64(acc, vmulq_f64(diff, diff), vld1q_f64(iv + d));
    }
    double q = vaddvq_f64(acc);
    for (; d < dim; ++d) {
      const double diff = x[d] - mu[d];
      q += diff * diff * iv[d];
    }
    out[m] = gconst[m] - 0.5 * q;
  }
}

void accumulate_neon(double w, const double* x, const double* center,
                     double* s1, double* s2, std::size_t n) {
  const float64x2_t wv = vdupq_n_f64(w);
  std::size_t d = 0;
  for (; d + 2 <= n; d += 2) {
    const float64x2_t diff = vsubq_f64(vld1q_f64(x + d), vld1q_f64(center + d));
    const float64x2_t wd = vmulq_f64(wv, diff);
    vst1q_f64(s1 + d, vaddq_f64(vld1q_f64(s1 + d), wd));
    vst1q_f64(s2 + d, vfmaq_f64(vld1q_f64(s2 + d), wd, diff));
  }
  for (; d < n; ++d) {
    const double diff = x[d] - center[d];
    s1[d] += w * diff;
    s2[d] += w * diff * diff;
  }
}

}  // namespace

const KernelTable& neon_table() {
  static const KernelTable table{dot_neon, diag_gauss_neon, accumulate_neon};
  return table;
}

}  // namespace talkcond::kernels::detail
