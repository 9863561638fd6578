#pragma once

// Run configuration for the talkcond command-line tool. The file format is
// INI:
//
//   [corpus]   manifest = path (relative to the config file)
//   [split]    mode = paper | explicit
//              train_speakers, test_speakers = comma lists of speaker ids
//              train_sentences, test_sentences = comma lists of sentence ids
//   [model]    kind = hmm | chmm2 | sphmm, states, mixtures, max_jump,
//              kmeans_iters, grouping, alpha, prosodic_mixtures,
//              prosodic_max_jump, seed
//   [train]    max_iters, tol, variance_floor_rel, variance_floor_abs, workers
//   [mfcc]     window_s, hop_s, n_mel_filters, n_cepstra, delta_window,
//              pre_emphasis, log_floor, low_freq_hz, high_freq_hz
//   [prosody]  block_frames, f0_min_hz, f0_max_hz, voicing_threshold,
//              analysis_window_s
//   [synth]    preset = stress | emotion | prosody, speakers, sentences,
//              repetitions, seed, paper_shaped = true | false
//   [output]   dir, cache_dir
//
// Unknown sections or keys are errors. Command-line flags override the file,
// which overrides the defaults.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "talkcond/corpus.hpp"
#include "talkcond/protocol.hpp"

namespace talkcond::cli {

struct SplitConfig {
  std::string mode = "paper";
  std::vector<std::string> train_speakers, test_speakers;
  std::vector<int> train_sentences, test_sentences;
};

struct SynthConfig {
  std::string preset = "stress";
  std::optional<int> speakers, sentences, repetitions;
  std::optional<std::uint64_t> seed;
  bool paper_shaped = false;
};

struct RunConfig {
  std::filesystem::path manifest;
  SplitConfig split;
  ProtocolConfig protocol;
  SynthConfig synth;
  std::filesystem::path output_dir;
};

RunConfig default_config();

// Reads an INI file on top of `base`.
RunConfig load_config(const std::filesystem::path& path, RunConfig base);

// Effective configuration as INI text (what a run actually used).
std::string config_to_ini(const RunConfig& cfg);

// Throws Error("config", ...) on out-of-range values.
void validate_config(const RunConfig& cfg);

SplitSpec resolve_split(const SplitConfig& split, const CorpusManifest& manifest);

SyntheticSpec synthetic_spec(const SynthConfig& synth);

std::vector<std::string> split_list(const std::string& s);

}  // namespace talkcond::cli
