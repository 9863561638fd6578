#pragma once

// Independent reference computations for the tests: probability-domain path
// enumeration, exhaustive observation sums and samplers. Nothing here calls
// the library's forward/backward code.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "talkcond/chmm2.hpp"
#include "talkcond/hmm.hpp"

namespace oracle {

using talkcond::DiscreteChmm2Model;
using talkcond::DiscreteHmm1Model;
using talkcond::Matrix;

// Random distribution of length n; each entry is zero with probability
// `zero_p` (at least one entry stays positive).
inline std::vector<double> random_simplex(std::mt19937_64& rng, std::size_t n, double zero_p = 0.0,
                                          const std::vector<bool>* allowed = nullptr) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  std::bernoulli_distribution drop(zero_p);
  std::vector<double> v(n, 0.0);
  double s = 0.0;
  std::size_t kept = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (allowed && !(*allowed)[i]) continue;
    if (drop(rng)) continue;
    v[i] = u(rng);
    s += v[i];
    ++kept;
  }
  if (kept == 0) {
    std::size_t i = 0;
    while (allowed && !(*allowed)[i]) ++i;
    v[i] = 1.0;
    s = 1.0;
  }
  for (double& x : v) x /= s;
  return v;
}

inline DiscreteHmm1Model random_discrete_hmm(std::mt19937_64& rng, std::size_t N, std::size_t M,
                                             double zero_p = 0.0) {
  DiscreteHmm1Model m{random_simplex(rng, N, zero_p), Matrix(N, N), Matrix(N, M)};
  for (std::size_t i = 0; i < N; ++i) {
    const auto a = random_simplex(rng, N, zero_p);
    const auto b = random_simplex(rng, M, zero_p);
    for (std::size_t j = 0; j < N; ++j) m.trans(i, j) = a[j];
    for (std::size_t k = 0; k < M; ++k) m.emit(i, k) = b[k];
  }
  return m;
}

inline bool ring_adj(std::size_t a, std::size_t b, std::size_t n) {
  const std::size_t d = (b + n - a) % n;
  return d == 0 || d == 1 || d + 1 == n;
}

inline DiscreteChmm2Model random_discrete_chmm2(std::mt19937_64& rng, std::size_t N, std::size_t M,
                                                double zero_p = 0.0) {
  DiscreteChmm2Model m{Matrix(N, N), Matrix(N * N, N), Matrix(N, M), Matrix(N * N, M)};
  std::vector<bool> pair_ok(N * N);
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t j = 0; j < N; ++j) pair_ok[i * N + j] = ring_adj(i, j, N);
  const auto pi = random_simplex(rng, N * N, zero_p, &pair_ok);
  for (std::size_t p = 0; p < N * N; ++p) m.initial_pair.flat()[p] = pi[p];
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t j = 0; j < N; ++j) {
      if (!ring_adj(i, j, N)) continue;
      std::vector<bool> ok(N);
      for (std::size_t k = 0; k < N; ++k) ok[k] = ring_adj(j, k, N);
      const auto a = random_simplex(rng, N, zero_p, &ok);
      for (std::size_t k = 0; k < N; ++k) m.trans2(i * N + j, k) = a[k];
    }
  }
  for (std::size_t i = 0; i < N; ++i) {
    const auto b = random_simplex(rng, M, zero_p);
    for (std::size_t s = 0; s < M; ++s) m.first_emit(i, s) = b[s];
  }
  for (std::size_t p = 0; p < N * N; ++p) {
    const auto b = random_simplex(rng, M, zero_p);
    for (std::size_t s = 0; s < M; ++s) m.pair_emit(p, s) = b[s];
  }
  return m;
}

// Calls f(seq) for every sequence in {0..base-1}^len.
inline void for_each_sequence(std::size_t base, std::size_t len,
                              const std::function<void(const std::vector<int>&)>& f) {
  std::vector<int> seq(len, 0);
  while (true) {
    f(seq);
    std::size_t pos = 0;
    while (pos < len && ++seq[pos] == static_cast<int>(base)) seq[pos++] = 0;
    if (pos == len) return;
  }
}

// P(O) = sum over all state paths of pi * prod a * prod b.
inline double brute_force(const DiscreteHmm1Model& m, const std::vector<int>& obs) {
  double total = 0.0;
  for_each_sequence(m.n_states(), obs.size(), [&](const std::vector<int>& s) {
    double p = m.initial[s[0]] * m.emit(s[0], obs[0]);
    for (std::size_t t = 1; t < obs.size(); ++t) p *= m.trans(s[t - 1], s[t]) * m.emit(s[t], obs[t]);
    total += p;
  });
  return total;
}

// P(O) = sum over paths of initial_pair(s0,s1) * b(O0|s0) * b(O1|s0,s1) *
//        prod_{t>=2} a(s_{t-2}, s_{t-1}, s_t) b(O_t|s_{t-1}, s_t).
inline double brute_force(const DiscreteChmm2Model& m, const std::vector<int>& obs) {
  const std::size_t N = m.n_states();
  double total = 0.0;
  for_each_sequence(N, obs.size(), [&](const std::vector<int>& s) {
    double p = m.initial_pair(s[0], s[1]) * m.first_emit(s[0], obs[0]) *
               m.pair_emit(s[0] * N + s[1], obs[1]);
    for (std::size_t t = 2; t < obs.size() && p > 0.0; ++t) {
      p *= m.trans2(s[t - 2] * N + s[t - 1], s[t]) * m.pair_emit(s[t - 1] * N + s[t], obs[t]);
    }
    total += p;
  });
  return total;
}

inline std::size_t draw(std::mt19937_64& rng, std::span<const double> p) {
  std::discrete_distribution<std::size_t> d(p.begin(), p.end());
  return d(rng);
}

inline std::vector<int> sample(const DiscreteHmm1Model& m, std::size_t T, std::mt19937_64& rng) {
  std::vector<int> out;
  std::size_t s = draw(rng, m.initial);
  for (std::size_t t = 0; t < T; ++t) {
    if (t > 0) s = draw(rng, m.trans.row(s));
    out.push_back(static_cast<int>(draw(rng, m.emit.row(s))));
  }
  return out;
}

inline std::vector<int> sample(const DiscreteChmm2Model& m, std::size_t T, std::mt19937_64& rng) {
  const std::size_t N = m.n_states();
  const std::size_t pair = draw(rng, m.initial_pair.flat());
  std::size_t prev = pair / N, cur = pair % N;
  std::vector<int> out{static_cast<int>(draw(rng, m.first_emit.row(prev))),
                       static_cast<int>(draw(rng, m.pair_emit.row(prev * N + cur)))};
  for (std::size_t t = 2; t < T; ++t) {
    const std::size_t next = draw(rng, m.trans2.row(prev * N + cur));
    prev = cur;
    cur = next;
    out.push_back(static_cast<int>(draw(rng, m.pair_emit.row(prev * N + cur))));
  }
  return out;
}

// Sequences from a 3-segment piecewise-Gaussian source in `dim` dimensions.
inline std::vector<talkcond::FeatureSequence> gaussian_sequences(std::mt19937_64& rng,
                                                                 std::size_t count,
                                                                 std::size_t dim,
                                                                 std::size_t min_len = 12,
                                                                 std::size_t max_len = 24) {
  std::uniform_int_distribution<std::size_t> len(min_len, max_len);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<talkcond::FeatureSequence> out;
  for (std::size_t n = 0; n < count; ++n) {
    const std::size_t T = len(rng);
    talkcond::FeatureSequence s;
    s.frames = Matrix(T, dim);
    for (std::size_t t = 0; t < T; ++t) {
      const double seg = static_cast<double>(3 * t / T);
      for (std::size_t d = 0; d < dim; ++d) s.frames(t, d) = 2.0 * seg + (d % 2 ? -seg : 0.0) + g(rng);
    }
    out.push_back(std::move(s));
  }
  return out;
}

inline bool close_rel(double a, double b, double rel) {
  if (a == b) return true;
  return std::abs(a - b) <= rel * std::max(std::abs(a), std::abs(b));
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("talkcond_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace oracle
