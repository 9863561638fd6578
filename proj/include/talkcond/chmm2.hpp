#pragma once

// Second-order circular HMM. States sit on a ring; a_ijk = P(s_t = k |
// s_{t-2} = i, s_{t-1} = j) is non-zero only when j is a ring neighbour of i
// and k a ring neighbour of j (neighbourhood {x-1, x, x+1} mod N).
//
// Forward lattice, 0-based slices t = 0..T-1 over state pairs:
//   alpha_0(i,k) = log pi(i,k) + log b(O_0 | i)
//   alpha_1(i,k) = alpha_0(i,k) + log b(O_1 | i,k)
//   alpha_t(j,k) = LSE_i[alpha_{t-1}(i,j) + log a_ijk] + log b(O_t | j,k)
//   log P(O) = LSE_{i,k} alpha_{T-1}(i,k)
// Backward: beta_{T-1} = 0 and symmetric; alpha_t + beta_t marginalizes to
// log P(O) on every slice. In continuous mode b(O_t | j,k) = b_k(O_t).

#include <span>
#include <vector>

#include "talkcond/features.hpp"
#include "talkcond/gmm.hpp"
#include "talkcond/hmm.hpp"
#include "talkcond/matrix.hpp"

namespace talkcond {

// Distinct members of {x-1, x, x+1} mod n in ascending order.
std::vector<std::size_t> ring_neighbours(std::size_t x, std::size_t n);
bool ring_adjacent(std::size_t from, std::size_t to, std::size_t n);

struct Chmm2Model {
  Matrix initial_pair;  // N x N joint over (s_0, s_1)
  Matrix trans2;        // row i*N + j is the distribution of k
  std::vector<GmmEmission> emissions;

  std::size_t n_states() const noexcept { return initial_pair.rows(); }
  std::size_t dim() const { return emissions.empty() ? 0 : emissions.front().dim(); }
  double a(std::size_t i, std::size_t j, std::size_t k) const {
    return trans2(i * n_states() + j, k);
  }

  void validate() const;
  friend bool operator==(const Chmm2Model&, const Chmm2Model&) = default;
};

// Discrete mode: the first symbol is emitted from s_0 alone, every later one
// from the (previous, current) state pair.
struct DiscreteChmm2Model {
  Matrix initial_pair;
  Matrix trans2;
  Matrix first_emit;  // N x M
  Matrix pair_emit;   // (N*N) x M, row j*N + k

  std::size_t n_states() const noexcept { return initial_pair.rows(); }
  std::size_t n_symbols() const noexcept { return first_emit.cols(); }
  double a(std::size_t i, std::size_t j, std::size_t k) const {
    return trans2(i * n_states() + j, k);
  }

  void validate() const;
  friend bool operator==(const DiscreteChmm2Model&, const DiscreteChmm2Model&) = default;
};

struct Chmm2Lattice {
  std::vector<Matrix> alpha;  // T slices of N x N (log)
  std::vector<Matrix> beta;
  double log_likelihood = 0.0;
};

// Pair-lattice inputs: log b(O_0 | i) and, for t >= 1, row t of log_pair
// holds log b(O_t | j,k) at column j*N + k (row 0 unused).
struct Chmm2Emissions {
  std::vector<double> log_first;
  Matrix log_pair;
};

Chmm2Emissions chmm2_emissions(const Chmm2Model& model, const FeatureSequence& seq);
Chmm2Emissions chmm2_emissions(const DiscreteChmm2Model& model, std::span<const int> symbols);

Chmm2Lattice chmm2_forward_backward(const Matrix& log_initial_pair, const Matrix& log_trans2,
                                    const Chmm2Emissions& em);
double chmm2_forward_log_likelihood(const Matrix& log_initial_pair, const Matrix& log_trans2,
                                    const Chmm2Emissions& em);

// Full lattice plus log P(O | model); T >= 2.
Chmm2Lattice forward_backward(const Chmm2Model& model, const FeatureSequence& seq);
Chmm2Lattice forward_backward(const DiscreteChmm2Model& model, std::span<const int> symbols);

double log_likelihood(const Chmm2Model& model, const FeatureSequence& seq);
double log_likelihood(const DiscreteChmm2Model& model, std::span<const int> symbols);

// Uniform initial pair over ring-adjacent pairs (normalized to 1), a_ijk =
// 1/|ring neighbourhood| on the band, emissions from k-means over equal
// per-state segments.
Chmm2Model init_chmm2(const HmmInitOptions& opts, std::span<const FeatureSequence> data,
                      const TrainOptions& train = {});

// Circular-band structure with uniform symbol rows (1/M).
DiscreteChmm2Model uniform_discrete_chmm2(std::size_t n_states, std::size_t n_symbols);

struct Chmm2TrainResult {
  Chmm2Model model;
  TrainTrace trace;
};

struct DiscreteChmm2TrainResult {
  DiscreteChmm2Model model;
  TrainTrace trace;
};

Chmm2TrainResult train_chmm2(Chmm2Model init, std::span<const FeatureSequence> data,
                             const TrainOptions& opts = {});
DiscreteChmm2TrainResult train_chmm2(DiscreteChmm2Model init,
                                     std::span<const std::vector<int>> data,
                                     const TrainOptions& opts = {});

}  // namespace talkcond
