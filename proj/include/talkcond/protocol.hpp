#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "talkcond/classify.hpp"
#include "talkcond/corpus.hpp"

namespace talkcond {

struct ProtocolConfig {
  ModelKind kind = ModelKind::kHmm;
  MfccConfig mfcc;
  ProsodyConfig prosody;
  std::size_t n_states = 9;
  std::size_t n_mix = 10;
  std::size_t max_jump = 2;
  int kmeans_iters = 10;
  TrainOptions train;  // train.workers is ignored; see `workers`
  SphmmOptions sphmm;
  std::uint64_t seed = 1;
  std::size_t workers = 1;
  // Feature cache directory; empty disables caching.
  std::filesystem::path cache_dir;
};

// Features for the listed utterances (other entries stay empty).
std::vector<UtteranceFeatures> compute_features(const CorpusManifest& manifest,
                                                std::span<const std::size_t> indices,
                                                const MfccConfig& mfcc,
                                                const ProsodyConfig& prosody, bool with_prosody,
                                                std::size_t workers,
                                                const std::filesystem::path& cache_dir = {});

struct ConditionTrainLog {
  std::string label;
  std::size_t n_utterances = 0;
  TrainTrace acoustic;
  TrainTrace prosodic;  // sphmm only
};

// Trains one model per condition on the train-side utterances of that
// condition. Every condition uses its own seed derived from cfg.seed and the
// label index, identical across model kinds, so an sphmm bank's acoustic
// models equal the hmm bank's models.
ModelBank train_bank(const CorpusManifest& manifest, std::span<const std::size_t> train_indices,
                     std::span<const UtteranceFeatures> features, const ProtocolConfig& cfg,
                     std::vector<ConditionTrainLog>* log = nullptr);

struct Evaluation {
  std::vector<Decision> decisions;
  ConfusionMatrix confusion;
  PerformanceReport report;
};

Evaluation evaluate_bank(const ModelBank& bank, const CorpusManifest& manifest,
                         std::span<const std::size_t> test_indices,
                         std::span<const UtteranceFeatures> features, std::size_t workers);

struct ProtocolResult {
  ModelBank bank;
  std::vector<ConditionTrainLog> log;
  Evaluation evaluation;
};

ProtocolResult run_protocol(const CorpusManifest& manifest, const SplitSpec& split,
                            const ProtocolConfig& cfg);

struct SweepRow {
  double alpha = 0.0;
  Evaluation evaluation;
  double average_all = 0.0;
  // Mean over every label except "neutral" (equals average_all when the set
  // has no neutral label).
  double average_excluding_neutral = 0.0;
};

// Scores the test set once per model component and fuses per alpha.
std::vector<SweepRow> alpha_sweep(const ModelBank& sphmm_bank, const CorpusManifest& manifest,
                                  std::span<const std::size_t> test_indices,
                                  std::span<const UtteranceFeatures> features,
                                  std::span<const double> alphas, std::size_t workers);

// Trains an sphmm bank once, then sweeps.
std::vector<SweepRow> alpha_sweep(const CorpusManifest& manifest, const SplitSpec& split,
                                  std::span<const double> alphas, ProtocolConfig cfg);

// "a:b:step" inclusive of b (within half a step), e.g. 0.0:1.0:0.1 -> 11 values.
std::vector<double> parse_alpha_range(std::string_view spec);

std::uint64_t condition_seed(std::uint64_t seed, std::size_t condition_index);

}  // namespace talkcond
