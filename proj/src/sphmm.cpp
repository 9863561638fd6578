#include "talkcond/sphmm.hpp"

#include <cmath>
#include <string>

#include "talkcond/error.hpp"

namespace talkcond {

void check_alpha(double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw ModelError("alpha must lie in [0, 1], got " + std::to_string(alpha));
  }
}

void SphmmModel::validate() const {
  check_alpha(alpha);
  acoustic.validate();
  prosodic.validate();
  if (grouping == 0 || prosodic.n_states() * grouping != acoustic.n_states()) {
    throw ModelError("prosodic states x grouping must equal acoustic states");
  }
}

SphmmModel train_sphmm(const Hmm1Model& acoustic, std::span<const FeatureSequence> prosodic_data,
                       const SphmmOptions& opts, const TrainOptions& train,
                       TrainTrace* prosodic_trace) {
  check_alpha(opts.alpha);
  acoustic.validate();
  if (opts.grouping == 0 || acoustic.n_states() % opts.grouping != 0) {
    throw ModelError("acoustic states (" + std::to_string(acoustic.n_states()) +
                     ") not divisible by grouping " + std::to_string(opts.grouping));
  }
  if (prosodic_data.empty()) throw TrainingError("no prosodic training sequences");
  HmmInitOptions init;
  init.n_states = acoustic.n_states() / opts.grouping;
  init.n_mix = opts.prosodic_mix;
  init.max_jump = opts.prosodic_max_jump;
  init.seed = opts.seed;
  auto result = train_baum_welch(init_hmm(init, prosodic_data, train), prosodic_data, train);
  if (prosodic_trace) *prosodic_trace = result.trace;
  SphmmModel model{acoustic, std::move(result.model), opts.alpha, opts.grouping};
  model.validate();
  return model;
}

double fuse_scores(double alpha, double acoustic, double prosodic) {
  if (alpha == 0.0) return acoustic;
  if (alpha == 1.0) return prosodic;
  return (1.0 - alpha) * acoustic + alpha * prosodic;
}

double fused_log_likelihood(const SphmmModel& model, const FeatureSequence& acoustic,
                            const FeatureSequence& prosodic) {
  check_alpha(model.alpha);
  return fuse_scores(model.alpha, log_likelihood(model.acoustic, acoustic),
                     log_likelihood(model.prosodic, prosodic));
}

}  // namespace talkcond
