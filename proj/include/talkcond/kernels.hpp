#pragma once

// Vector kernels for the arithmetic inner loops (GMM scoring, EM moment
// accumulation, filterbank/DCT products). Each kernel has a scalar reference
// implementation plus ISA-specific variants; the variant is chosen once at
// startup from the CPU's capabilities and can be pinned for testing.

#include <cstddef>
#include <span>
#include <vector>

namespace talkcond::kernels {

enum class Isa { kScalar, kAvx2, kNeon };

const char* isa_name(Isa isa);

// ISAs compiled into this binary and supported by the running CPU.
std::vector<Isa> available_isas();

Isa active_isa();

// Pins the dispatch table to `isa`. Returns false (and changes nothing) when
// the ISA is not available. Not thread-safe against concurrent kernel calls.
bool set_active_isa(Isa isa);

// sum_i a[i] * b[i]
double dot(std::span<const double> a, std::span<const double> b);

// For each component m in [0, n_mix):
//   out[m] = gconst[m] - 0.5 * sum_d (x[d] - means[m*D + d])^2 * inv_vars[m*D + d]
// with D = x.size(). means and inv_vars are row-major n_mix x D.
void diag_gauss_log_densities(std::span<const double> x,
                              std::span<const double> means,
                              std::span<const double> inv_vars,
                              std::span<const double> gconst,
                              std::span<double> out);

// s1[d] += w * (x[d] - center[d]);  s2[d] += w * (x[d] - center[d])^2
void accumulate_moments(double w, std::span<const double> x,
                        std::span<const double> center, std::span<double> s1,
                        std::span<double> s2);

// Function table filled by each ISA translation unit.
struct KernelTable {
  double (*dot)(const double* a, const double* b, std::size_t n);
  void (*diag_gauss)(const double* x, std::size_t dim, const double* means,
                     const double* inv_vars, const double* gconst,
                     std::size_t n_mix, double* out);
  void (*accumulate)(double w, const double* x, const double* center,
                     double* s1, double* s2, std::size_t n);
};

namespace detail {
const KernelTable& scalar_table();
#if defined(TALKCOND_HAVE_AVX2)
const KernelTable& avx2_table();
#endif
#if defined(TALKCOND_HAVE_NEON)
const KernelTable& neon_table();
#endif
}  // namespace detail

}  // namespace talkcond::kernels
