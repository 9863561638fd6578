#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "talkcond/features.hpp"
#include "talkcond/gmm.hpp"
#include "talkcond/matrix.hpp"

namespace talkcond {

struct TrainOptions {
  int max_iters = 40;
  // Stop once the total log-likelihood improves by less than this.
  double tol = 1e-4;
  // Per-dimension variance floor = max(rel * global variance, abs).
  double variance_floor_rel = 1e-4;
  double variance_floor_abs = 1e-6;
  // Explicit floor; computed from the training data when empty.
  std::vector<double> variance_floor;
  std::size_t workers = 1;
};

// Log-likelihood after each evaluated model: trace[0] is the initial model,
// trace[k] the model after k EM updates.
struct TrainTrace {
  std::vector<double> log_likelihood;
  bool converged = false;
};

// Floor used by EM for the given data and options.
std::vector<double> variance_floor_for(std::span<const FeatureSequence> data,
                                       const TrainOptions& opts);

// First-order HMM with diagonal-GMM emissions. The transition zero pattern
// is the topology; EM never turns a zero into a non-zero.
struct Hmm1Model {
  std::vector<double> initial;
  Matrix trans;
  std::vector<GmmEmission> emissions;

  std::size_t n_states() const noexcept { return initial.size(); }
  std::size_t dim() const { return emissions.empty() ? 0 : emissions.front().dim(); }

  // Throws ModelError unless initial and every transition row sum to 1
  // within 1e-9 and every emission is valid with a common dimension.
  void validate() const;

  friend bool operator==(const Hmm1Model&, const Hmm1Model&) = default;
};

// Discrete-symbol variant: emit(i, s) = P(symbol s | state i).
struct DiscreteHmm1Model {
  std::vector<double> initial;
  Matrix trans;
  Matrix emit;

  std::size_t n_states() const noexcept { return initial.size(); }
  std::size_t n_symbols() const noexcept { return emit.cols(); }
  void validate() const;

  friend bool operator==(const DiscreteHmm1Model&, const DiscreteHmm1Model&) = default;
};

// Log forward/backward lattices (T x N) for a first-order chain given
// per-frame state log-emissions.
struct Lattice1 {
  Matrix log_alpha;
  Matrix log_beta;
  double log_likelihood = 0.0;
};

double forward_log_likelihood(std::span<const double> log_initial, const Matrix& log_trans,
                              const Matrix& log_emit);
Lattice1 forward_backward(std::span<const double> log_initial, const Matrix& log_trans,
                          const Matrix& log_emit);

// Per-frame state log-emissions (T x N).
Matrix emission_log_matrix(const Hmm1Model& model, const FeatureSequence& seq);

// log P(O | model) by the forward recursion.
double log_likelihood(const Hmm1Model& model, const FeatureSequence& seq);
double log_likelihood(const DiscreteHmm1Model& model, std::span<const int> symbols);

struct HmmInitOptions {
  std::size_t n_states = 9;
  std::size_t n_mix = 10;
  // Left-to-right band: a_ij may be non-zero for i <= j <= i + max_jump.
  std::size_t max_jump = 2;
  std::uint64_t seed = 1;
  int kmeans_iters = 10;
};

// Left-to-right model starting in state 0 with uniform banded transitions and
// emissions from k-means over equal-length per-state segments of each
// sequence.
Hmm1Model init_hmm(const HmmInitOptions& opts, std::span<const FeatureSequence> data,
                   const TrainOptions& train = {});

// Per-state frame pools from equal-length segmentation (state of frame t is
// floor(t * N / T)).
std::vector<std::vector<std::span<const double>>> segment_frames(
    std::span<const FeatureSequence> data, std::size_t n_states);

struct Hmm1TrainResult {
  Hmm1Model model;
  TrainTrace trace;
};

struct DiscreteHmm1TrainResult {
  DiscreteHmm1Model model;
  TrainTrace trace;
};

Hmm1TrainResult train_baum_welch(Hmm1Model init, std::span<const FeatureSequence> data,
                                 const TrainOptions& opts = {});
DiscreteHmm1TrainResult train_baum_welch(DiscreteHmm1Model init,
                                         std::span<const std::vector<int>> data,
                                         const TrainOptions& opts = {});

namespace detail {

// Sequences per statistics chunk. Chunk boundaries depend only on the data,
// so the reduction order (and the result) is the same for any worker count.
inline constexpr std::size_t kStatsChunk = 8;

void check_stochastic(std::span<const double> v, const char* what);
void check_rows_stochastic(const Matrix& m, const char* what, bool allow_zero_rows);
std::vector<double> log_vector(std::span<const double> v);
Matrix log_matrix(const Matrix& m);

}  // namespace detail

}  // namespace talkcond
