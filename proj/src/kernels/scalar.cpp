#include "talkcond/kernels.hpp"

namespace talkcond::kernels::detail {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void diag_gauss_scalar(const double* x, std::size_t dim, const double* means,
                       const double* inv_vars, const double* gconst,
                       std::size_t n_mix, double* out) {
  for (std::size_t m = 0; m < n_mix; ++m) {
    const double* mu = means + m * dim;
    const double* iv = inv_vars + m * dim;
    double q = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
      const double diff = x[d] - mu[d];
      q += diff * diff * iv[d];
    }
    out[m] = gconst[m] - 0.5 * q;
  }
}

void accumulate_scalar(double w, const double* x, const double* center,
                       double* s1, double* s2, std::size_t n) {
  for (std::size_t d = 0; d < n; ++d) {
    const double diff = x[d] - center[d];
    s1[d] += w * diff;
    s2[d] += w * diff * diff;
  }
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{dot_scalar, diag_gauss_scalar, accumulate_scalar};
  return table;
}

}  // namespace talkcond::kernels::detail
