#pragma once

// Suprasegmental layer over an acoustic HMM. The prosodic model is a
// separate left-to-right HMM over block-rate prosodic vectors; each of its
// states stands for `grouping` consecutive acoustic states. Scores fuse as
//   (1 - alpha) * log P(acoustic | lambda) + alpha * log P(prosodic | psi).

#include <span>

#include "talkcond/features.hpp"
#include "talkcond/hmm.hpp"

namespace talkcond {

struct SphmmModel {
  Hmm1Model acoustic;
  Hmm1Model prosodic;
  double alpha = 0.5;
  std::size_t grouping = 3;

  void validate() const;
  friend bool operator==(const SphmmModel&, const SphmmModel&) = default;
};

struct SphmmOptions {
  double alpha = 0.5;
  std::size_t grouping = 3;
  std::size_t prosodic_mix = 2;
  std::size_t prosodic_max_jump = 1;
  std::uint64_t seed = 1;
};

void check_alpha(double alpha);

// Trains the prosodic model on `prosodic_data`; `acoustic` is copied as is.
SphmmModel train_sphmm(const Hmm1Model& acoustic, std::span<const FeatureSequence> prosodic_data,
                       const SphmmOptions& opts, const TrainOptions& train = {},
                       TrainTrace* prosodic_trace = nullptr);

// Exact endpoints: alpha 0 returns `acoustic`, alpha 1 returns `prosodic`.
double fuse_scores(double alpha, double acoustic, double prosodic);

double fused_log_likelihood(const SphmmModel& model, const FeatureSequence& acoustic,
                            const FeatureSequence& prosodic);

}  // namespace talkcond
