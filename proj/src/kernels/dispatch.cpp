#include <atomic>
#include <cassert>
#include <cstdlib>
#include <string_view>

#include "talkcond/kernels.hpp"

namespace talkcond::kernels {
namespace {

bool cpu_supports(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return true;
    case Isa::kAvx2:
#if defined(TALKCOND_HAVE_AVX2)
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Isa::kNeon:
#if defined(TALKCOND_HAVE_NEON)
      return true;
#else
      return false;
#endif
  }
  return false;
}

const KernelTable& table_for(Isa isa) {
  switch (isa) {
#if defined(TALKCOND_HAVE_AVX2)
    case Isa::kAvx2:
      return detail::avx2_table();
#endif
#if defined(TALKCOND_HAVE_NEON)
    case Isa::kNeon:
      return detail::neon_table();
#endif
    default:
      return detail::scalar_table();
  }
}

// TALKCOND_ISA=scalar pins the reference kernels for a whole process.
Isa initial_isa() {
  if (const char* env = std::getenv("TALKCOND_ISA")) {
    const std::string_view v(env);
    if (v == "scalar") return Isa::kScalar;
    if (v == "avx2" && cpu_supports(Isa::kAvx2)) return Isa::kAvx2;
    if (v == "neon" && cpu_supports(Isa::kNeon)) return Isa::kNeon;
  }
  if (cpu_supports(Isa::kAvx2)) return Isa::kAvx2;
  if (cpu_supports(Isa::kNeon)) return Isa::kNeon;
  return Isa::kScalar;
}

struct Dispatch {
  Isa isa;
  const KernelTable* table;
};

Dispatch& dispatch() {
  static Dispatch d = [] {
    const Isa isa = initial_isa();
    return Dispatch{isa, &table_for(isa)};
  }();
  return d;
}

}  // namespace

const char* isa_name(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return "scalar";
    case Isa::kAvx2:
      return "avx2";
    case Isa::kNeon:
      return "neon";
  }
  return "unknown";
}

std::vector<Isa> available_isas() {
  std::vector<Isa> out;
  for (Isa isa : {Isa::kScalar, Isa::kAvx2, Isa::kNeon}) {
    if (cpu_supports(isa)) out.push_back(isa);
  }
  return out;
}

Isa active_isa() { return dispatch().isa; }

bool set_active_isa(Isa isa) {
  if (!cpu_supports(isa)) return false;
  dispatch() = Dispatch{isa, &table_for(isa)};
  return true;
}

double dot(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  return dispatch().table->dot(a.data(), b.data(), a.size());
}

void diag_gauss_log_densities(std::span<const double> x,
                              std::span<const double> means,
                              std::span<const double> inv_vars,
                              std::span<const double> gconst,
                              std::span<double> out) {
  const std::size_t n_mix = gconst.size();
  assert(out.size() == n_mix);
  assert(means.size() == n_mix * x.size() && inv_vars.size() == means.size());
  dispatch().table->diag_gauss(x.data(), x.size(), means.data(), inv_vars.data(),
                               gconst.data(), n_mix, out.data());
}

void accumulate_moments(double w, std::span<const double> x,
                        std::span<const double> center, std::span<double> s1,
                        std::span<double> s2) {
  assert(x.size() == center.size() && s1.size() == x.size() && s2.size() == x.size());
  dispatch().table->accumulate(w, x.data(), center.data(), s1.data(), s2.data(),
                               x.size());
}

}  // namespace talkcond::kernels
