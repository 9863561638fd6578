#include "talkcond/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "talkcond/error.hpp"
#include "talkcond/kernels.hpp"
#include "talkcond/logmath.hpp"

namespace talkcond {

GmmEmission::GmmEmission(std::vector<double> weights, Matrix means, Matrix variances)
    : weights_(std::move(weights)), means_(std::move(means)), variances_(std::move(variances)) {
  finalize();
}

void GmmEmission::finalize() {
  const std::size_t M = n_mix(), D = dim();
  if (means_.rows() != M || variances_.rows() != M || variances_.cols() != D) {
    throw ModelError("GMM parameter shapes disagree");
  }
  inv_vars_ = Matrix(M, D);
  gconst_.assign(M, 0.0);
  const double log2pi = std::log(2.0 * std::numbers::pi);
  for (std::size_t m = 0; m < M; ++m) {
    double g = safe_log(weights_[m]) - 0.5 * D * log2pi;
    for (std::size_t d = 0; d < D; ++d) {
      inv_vars_(m, d) = 1.0 / variances_(m, d);
      g -= 0.5 * std::log(variances_(m, d));
    }
    gconst_[m] = g;
  }
}

void GmmEmission::validate() const {
  if (n_mix() == 0 || dim() == 0) throw ModelError("empty GMM");
  if (means_.rows() != n_mix() || variances_.rows() != n_mix() || variances_.cols() != dim()) {
    throw ModelError("GMM parameter shapes disagree");
  }
  double sum = 0.0;
  for (double w : weights_) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ModelError("GMM weight out of range");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ModelError("GMM weights do not sum to 1");
  for (double v : variances_.flat()) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ModelError("GMM variance must be positive");
  }
  for (double v : means_.flat()) {
    if (!std::isfinite(v)) throw ModelError("GMM mean is not finite");
  }
}

void GmmEmission::component_log_densities(std::span<const double> x, std::span<double> out) const {
  kernels::diag_gauss_log_densities(x, means_.flat(), inv_vars_.flat(), gconst_, out);
}

double GmmEmission::log_density(std::span<const double> x) const {
  double buf[64];
  std::vector<double> heap;
  std::span<double> out;
  if (n_mix() <= 64) {
    out = std::span<double>(buf, n_mix());
  } else {
    heap.resize(n_mix());
    out = heap;
  }
  component_log_densities(x, out);
  return log_sum_exp(out);
}

void GmmStats::add(const GmmStats& o) {
  for (std::size_t m = 0; m < occ.size(); ++m) occ[m] += o.occ[m];
  auto a1 = s1.flat();
  auto b1 = o.s1.flat();
  for (std::size_t i = 0; i < a1.size(); ++i) a1[i] += b1[i];
  auto a2 = s2.flat();
  auto b2 = o.s2.flat();
  for (std::size_t i = 0; i < a2.size(); ++i) a2[i] += b2[i];
}

bool update_gmm(GmmEmission& gmm, const GmmStats& stats, std::span<const double> floor) {
  const double total = std::accumulate(stats.occ.begin(), stats.occ.end(), 0.0);
  if (!(total > 0.0)) return false;
  const std::size_t D = gmm.dim();
  for (std::size_t m = 0; m < gmm.n_mix(); ++m) {
    const double occ = stats.occ[m];
    gmm.weights()[m] = occ / total;
    if (!(occ > 0.0)) continue;
    for (std::size_t d = 0; d < D; ++d) {
      const double shift = stats.s1(m, d) / occ;
      const double var = stats.s2(m, d) / occ - shift * shift;
      gmm.means()(m, d) += shift;
      gmm.variances()(m, d) = std::max(var, floor[d]);
    }
  }
  gmm.finalize();
  return true;
}

namespace {

double sq_dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

}  // namespace

GmmEmission fit_gmm_kmeans(const std::vector<std::span<const double>>& frames, std::size_t n_mix,
                           std::span<const double> floor, std::mt19937_64& rng, int iterations) {
  if (frames.empty()) throw TrainingError("no frames to initialise a GMM");
  if (n_mix == 0) throw TrainingError("GMM needs at least one component");
  const std::size_t D = frames.front().size();
  const std::size_t n = frames.size();

  // Pooled moments, used for empty clusters.
  std::vector<double> mean(D, 0.0), var(D, 0.0);
  for (const auto& f : frames) {
    for (std::size_t d = 0; d < D; ++d) mean[d] += f[d];
  }
  for (double& v : mean) v /= n;
  for (const auto& f : frames) {
    for (std::size_t d = 0; d < D; ++d) var[d] += (f[d] - mean[d]) * (f[d] - mean[d]);
  }
  for (std::size_t d = 0; d < D; ++d) var[d] = std::max(var[d] / n, floor[d]);

  // Distinct frames in a seeded order.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::size_t> distinct;
  {
    std::vector<std::size_t> sorted(order);
    std::stable_sort(sorted.begin(), sorted.end(), [&](std::size_t a, std::size_t b) {
      return std::lexicographical_compare(frames[a].begin(), frames[a].end(), frames[b].begin(),
                                          frames[b].end());
    });
    std::vector<bool> keep(n, false);
    for (std::size_t i = 0; i < sorted.size(); ++i) {
      if (i == 0 || !std::equal(frames[sorted[i]].begin(), frames[sorted[i]].end(),
                                frames[sorted[i - 1]].begin())) {
        keep[sorted[i]] = true;
      }
    }
    for (std::size_t i : order) {
      if (keep[i]) distinct.push_back(i);
    }
  }

  Matrix centers(n_mix, D);
  for (std::size_t m = 0; m < n_mix; ++m) {
    const auto& src = frames[distinct[m % distinct.size()]];
    std::copy(src.begin(), src.end(), centers.row(m).begin());
  }
  const bool duplicated = distinct.size() < n_mix;

  std::vector<std::size_t> assign(n, 0);
  std::vector<double> counts(n_mix);
  for (int it = 0; it < iterations && !duplicated; ++it) {
    bool changed = it == 0;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double best_d = sq_dist(frames[i], centers.row(0));
      for (std::size_t m = 1; m < n_mix; ++m) {
        const double dd = sq_dist(frames[i], centers.row(m));
        if (dd < best_d) {
          best_d = dd;
          best = m;
        }
      }
      if (assign[i] != best) changed = true;
      assign[i] = best;
    }
    if (!changed) break;
    Matrix sums(n_mix, D);
    std::fill(counts.begin(), counts.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      counts[assign[i]] += 1.0;
      for (std::size_t d = 0; d < D; ++d) sums(assign[i], d) += frames[i][d];
    }
    for (std::size_t m = 0; m < n_mix; ++m) {
      if (counts[m] == 0.0) continue;  // keep the old centre
      for (std::size_t d = 0; d < D; ++d) centers(m, d) = sums(m, d) / counts[m];
    }
  }

  // Final assignment and per-cluster moments.
  Matrix variances(n_mix, D);
  std::vector<double> weights(n_mix);
  std::fill(counts.begin(), counts.end(), 0.0);
  if (duplicated) {
    std::uniform_real_distribution<double> jitter(1.0, 1.5);
    for (std::size_t m = 0; m < n_mix; ++m) {
      for (std::size_t d = 0; d < D; ++d) variances(m, d) = var[d] * jitter(rng);
      weights[m] = 1.0 / n_mix;
    }
    return GmmEmission(std::move(weights), std::move(centers), std::move(variances));
  }
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = 0;
    double best_d = sq_dist(frames[i], centers.row(0));
    for (std::size_t m = 1; m < n_mix; ++m) {
      const double dd = sq_dist(frames[i], centers.row(m));
      if (dd < best_d) {
        best_d = dd;
        best = m;
      }
    }
    assign[i] = best;
    counts[best] += 1.0;
  }
  Matrix means(n_mix, D);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t d = 0; d < D; ++d) means(assign[i], d) += frames[i][d];
  }
  for (std::size_t m = 0; m < n_mix; ++m) {
    for (std::size_t d = 0; d < D; ++d) {
      means(m, d) = counts[m] > 0 ? means(m, d) / counts[m] : centers(m, d);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t d = 0; d < D; ++d) {
      const double diff = frames[i][d] - means(assign[i], d);
      variances(assign[i], d) += diff * diff;
    }
  }
  for (std::size_t m = 0; m < n_mix; ++m) {
    for (std::size_t d = 0; d < D; ++d) {
      variances(m, d) = counts[m] > 1 ? std::max(variances(m, d) / counts[m], floor[d]) : var[d];
    }
    // Add-one smoothing keeps every component alive for EM.
    weights[m] = (counts[m] + 1.0) / (n + static_cast<double>(n_mix));
  }
  return GmmEmission(std::move(weights), std::move(means), std::move(variances));
}

}  // namespace talkcond
