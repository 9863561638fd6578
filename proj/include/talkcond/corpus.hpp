#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace talkcond {

// Ordered set of talking-condition labels. A label's position is the model
// index used everywhere downstream.
struct ConditionSet {
  std::string name;
  std::vector<std::string> labels;

  std::size_t size() const noexcept { return labels.size(); }
  std::optional<std::size_t> index_of(std::string_view label) const;

  // Throws CorpusError when labels are empty, blank or duplicated.
  void validate() const;

  static ConditionSet stress();   // neutral shouted slow loud soft fast
  static ConditionSet emotion();  // neutral angry sad happy disgust fear

  friend bool operator==(const ConditionSet&, const ConditionSet&) = default;
};

enum class Gender { kMale, kFemale, kUnknown };

const char* gender_name(Gender g);
Gender parse_gender(std::string_view s);

struct Utterance {
  std::filesystem::path audio_path;  // absolute after load_manifest
  std::string speaker_id;
  Gender gender = Gender::kUnknown;
  int sentence_id = 1;
  std::string condition;
  int repetition = 1;

  friend bool operator==(const Utterance&, const Utterance&) = default;
};

struct CorpusManifest {
  ConditionSet condition_set;
  std::vector<Utterance> utterances;
  int sample_rate_hz = 16000;

  std::size_t condition_index(const Utterance& u) const;

  friend bool operator==(const CorpusManifest&, const CorpusManifest&) = default;
};

struct ManifestLoadOptions {
  // Check that each referenced audio file exists.
  bool verify_audio = true;
};

// Manifest format (UTF-8, one record per line, tab separated):
//
//   #talkcond-manifest v1
//   #conditions <set-name> <label1>,<label2>,...
//   #sample_rate <hz>
//   audio_path	speaker_id	gender	sentence_id	condition	repetition
//   wav/s01_1_neutral_1.wav	s01	male	1	neutral	1
//   ...
//
// Relative audio paths resolve against the manifest's directory. Blank lines
// are skipped.
CorpusManifest load_manifest(const std::filesystem::path& path,
                             const ManifestLoadOptions& opts = {});

// Writes paths relative to the manifest directory when they live under it.
void save_manifest(const CorpusManifest& manifest, const std::filesystem::path& path);

// Validates labels, repetition >= 1, sample rate and key uniqueness.
void validate_manifest(const CorpusManifest& manifest);

struct SplitSpec {
  std::set<std::string> train_speakers;
  std::set<std::string> test_speakers;
  std::set<int> train_sentences;
  std::set<int> test_sentences;

  // Throws CorpusError when the speaker or sentence sets overlap or a side is
  // empty.
  void validate() const;

  bool is_train(const Utterance& u) const;
  bool is_test(const Utterance& u) const;
};

// Speaker- and text-independent split: the first ceil(2/3) of speakers (sorted
// by id) and the first half of sentence ids train, the rest test.
SplitSpec paper_split(const CorpusManifest& manifest);

std::vector<std::size_t> train_indices(const CorpusManifest& m, const SplitSpec& s);
std::vector<std::size_t> test_indices(const CorpusManifest& m, const SplitSpec& s);

// Signal parameters for one synthetic talking condition. Pitch is given for a
// reference male speaker; speakers scale it by their own factor.
struct ConditionVoice {
  std::string label;
  double pitch_lo_hz = 110.0;
  double pitch_hi_hz = 130.0;
  double amp_lo = 0.2;
  double amp_hi = 0.25;
  double rate = 1.0;         // duration multiplier (>1 is slower)
  double noise = 0.02;       // aspiration noise relative to voiced excitation
  double formant_shift = 1.0;
  double tilt = 0.6;  // one-pole glottal tilt in [0, 1); larger is darker
};

struct SyntheticSpec {
  std::string set_name = "stress";
  std::vector<ConditionVoice> conditions;
  int speakers = 6;
  int sentences = 8;
  int repetitions = 3;
  std::uint64_t seed = 7;
  int sample_rate_hz = 16000;
  // Relative spread of speaker pitch around the gender base.
  double speaker_pitch_spread = 0.06;
  double female_pitch_factor = 1.3;

  // Six stress conditions with well separated pitch/energy/tempo.
  static SyntheticSpec stress_preset();
  static SyntheticSpec emotion_preset();
  // Conditions share amplitude, noise and formants; only pitch and tempo vary.
  static SyntheticSpec prosody_only_preset();
  // 30 speakers x 8 sentences x 9 repetitions (12960 utterances for 6 conditions).
  static SyntheticSpec paper_shaped(SyntheticSpec base);
};

// Writes <out_dir>/wav/*.wav plus <out_dir>/manifest.tsv and returns the
// manifest. Deterministic for a given spec (each clip has its own RNG stream
// derived from the seed and the clip key).
CorpusManifest generate_synthetic(const SyntheticSpec& spec,
                                  const std::filesystem::path& out_dir);

// Samples of a single clip without touching the filesystem.
std::vector<std::int16_t> synthesize_clip(const SyntheticSpec& spec,
                                          std::size_t condition, int speaker,
                                          int sentence, int repetition);

}  // namespace talkcond
