#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "talkcond/matrix.hpp"

namespace talkcond {

// Diagonal-covariance Gaussian mixture. Call finalize() after editing the
// parameters; it refreshes the cached inverse variances and normalizers used
// by the scoring kernels.
class GmmEmission {
 public:
  GmmEmission() = default;
  GmmEmission(std::vector<double> weights, Matrix means, Matrix variances);

  std::size_t n_mix() const noexcept { return weights_.size(); }
  std::size_t dim() const noexcept { return means_.cols(); }

  const std::vector<double>& weights() const noexcept { return weights_; }
  const Matrix& means() const noexcept { return means_; }
  const Matrix& variances() const noexcept { return variances_; }
  std::vector<double>& weights() noexcept { return weights_; }
  Matrix& means() noexcept { return means_; }
  Matrix& variances() noexcept { return variances_; }

  void finalize();

  // Weights non-negative and summing to 1 within 1e-9, variances > 0 and
  // finite, shapes consistent.
  void validate() const;

  // log(w_m) + log N(x; mu_m, diag var_m) for every component.
  void component_log_densities(std::span<const double> x, std::span<double> out) const;
  double log_density(std::span<const double> x) const;

  friend bool operator==(const GmmEmission& a, const GmmEmission& b) {
    return a.weights_ == b.weights_ && a.means_ == b.means_ && a.variances_ == b.variances_;
  }

 private:
  std::vector<double> weights_;
  Matrix means_;
  Matrix variances_;
  Matrix inv_vars_;
  std::vector<double> gconst_;  // log w - 0.5 * (D log 2pi + sum log var)
};

// Sufficient statistics centred on the current means (better conditioned
// than raw second moments when the variance is small next to the mean).
struct GmmStats {
  std::vector<double> occ;
  Matrix s1;
  Matrix s2;

  GmmStats() = default;
  GmmStats(std::size_t n_mix, std::size_t dim) : occ(n_mix, 0.0), s1(n_mix, dim), s2(n_mix, dim) {}
  void add(const GmmStats& other);
};

// Re-estimates `gmm` from `stats`. Components with zero occupancy keep their
// parameters (their weight becomes 0). Returns false when the whole mixture
// had zero occupancy.
bool update_gmm(GmmEmission& gmm, const GmmStats& stats, std::span<const double> variance_floor);

// k-means (Lloyd, seeded) fit of an n_mix-component mixture to `frames`.
// With fewer distinct frames than n_mix, centres are duplicated and their
// variances jittered so the components stay distinguishable.
GmmEmission fit_gmm_kmeans(const std::vector<std::span<const double>>& frames, std::size_t n_mix,
                           std::span<const double> variance_floor, std::mt19937_64& rng,
                           int iterations = 10);

}  // namespace talkcond
