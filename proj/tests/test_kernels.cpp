#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "talkcond/hmm.hpp"
#include "talkcond/kernels.hpp"

using namespace talkcond;
namespace k = talkcond::kernels;

namespace {

std::vector<double> random_vec(std::mt19937_64& rng, std::size_t n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

// Restores the startup ISA when a test ends.
struct IsaGuard {
  k::Isa saved = k::active_isa();
  ~IsaGuard() { k::set_active_isa(saved); }
};

bool near(double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(b)); }

}  // namespace

TEST_CASE("scalar is always available and can be pinned") {
  IsaGuard guard;
  const auto isas = k::available_isas();
  CHECK(std::find(isas.begin(), isas.end(), k::Isa::kScalar) != isas.end());
  CHECK(k::set_active_isa(k::Isa::kScalar));
  CHECK(k::active_isa() == k::Isa::kScalar);
  CHECK(std::string(k::isa_name(k::Isa::kAvx2)) == "avx2");
}

TEST_CASE("every ISA matches a plain loop on odd and even lengths") {
  IsaGuard guard;
  std::mt19937_64 rng(17);
  for (k::Isa isa : k::available_isas()) {
    CAPTURE(k::isa_name(isa));
    REQUIRE(k::set_active_isa(isa));
    for (std::size_t n : {1u, 2u, 3u, 4u, 5u, 7u, 8u, 13u, 24u, 31u}) {
      const auto a = random_vec(rng, n, -3, 3), b = random_vec(rng, n, -3, 3);
      double ref = 0.0;
      for (std::size_t i = 0; i < n; ++i) ref += a[i] * b[i];
      CHECK(near(k::dot(a, b), ref));

      const std::size_t M = 3;
      const auto means = random_vec(rng, M * n, -2, 2), iv = random_vec(rng, M * n, 0.1, 4);
      const auto gconst = random_vec(rng, M, -5, 0);
      std::vector<double> out(M);
      k::diag_gauss_log_densities(a, means, iv, gconst, out);
      for (std::size_t m = 0; m < M; ++m) {
        double q = 0.0;
        for (std::size_t d = 0; d < n; ++d) q += (a[d] - means[m * n + d]) * (a[d] - means[m * n + d]) * iv[m * n + d];
        CHECK(near(out[m], gconst[m] - 0.5 * q));
      }

      std::vector<double> s1(n, 0.5), s2(n, 0.25), r1 = s1, r2 = s2;
      k::accumulate_moments(0.3, a, b, s1, s2);
      for (std::size_t d = 0; d < n; ++d) {
        r1[d] += 0.3 * (a[d] - b[d]);
        r2[d] += 0.3 * (a[d] - b[d]) * (a[d] - b[d]);
        CHECK(near(s1[d], r1[d]));
        CHECK(near(s2[d], r2[d]));
      }
    }
  }
}

TEST_CASE("model likelihoods agree across ISAs") {
  IsaGuard guard;
  std::mt19937_64 rng(23);
  const auto data = oracle::gaussian_sequences(rng, 8, 24, 20, 30);
  HmmInitOptions init;
  init.n_states = 3;
  init.n_mix = 4;
  REQUIRE(k::set_active_isa(k::Isa::kScalar));
  const auto model = init_hmm(init, data);
  std::vector<double> ref;
  for (const auto& s : data) ref.push_back(log_likelihood(model, s));
  for (k::Isa isa : k::available_isas()) {
    REQUIRE(k::set_active_isa(isa));
    for (std::size_t n = 0; n < data.size(); ++n) {
      CHECK(std::abs(log_likelihood(model, data[n]) - ref[n]) <= 1e-10 * std::abs(ref[n]));
    }
  }
}
