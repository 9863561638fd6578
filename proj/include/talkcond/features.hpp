#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "talkcond/matrix.hpp"

namespace talkcond {

enum class FeatureKind { kAcoustic, kProsodic };

const char* feature_kind_name(FeatureKind k);

// Time-ordered observation vectors, one row per frame.
struct FeatureSequence {
  Matrix frames;
  double frame_period_s = 0.01;
  FeatureKind kind = FeatureKind::kAcoustic;

  std::size_t size() const noexcept { return frames.rows(); }
  std::size_t dim() const noexcept { return frames.cols(); }
  std::span<const double> frame(std::size_t t) const { return frames.row(t); }

  // Throws FeatureError on a non-positive frame period or non-finite values.
  void validate() const;
};

struct MfccConfig {
  double window_s = 0.025;
  double hop_s = 0.010;
  int n_mel_filters = 24;
  int n_cepstra = 12;  // statics c0..c(n-1); output dim is 2 * n_cepstra
  int delta_window = 2;
  double pre_emphasis = 0.97;
  double log_floor = 1e-10;
  double low_freq_hz = 20.0;
  double high_freq_hz = 0.0;  // <= 0 means Nyquist

  void validate() const;
  // Stable text form; part of bank files and feature-cache keys.
  std::string to_string() const;

  friend bool operator==(const MfccConfig&, const MfccConfig&) = default;
};

struct ProsodyConfig {
  int block_frames = 9;
  double f0_min_hz = 60.0;
  double f0_max_hz = 400.0;
  double voicing_threshold = 0.3;
  double analysis_window_s = 0.04;

  void validate(int sample_rate_hz) const;
  std::string to_string() const;

  friend bool operator==(const ProsodyConfig&, const ProsodyConfig&) = default;
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Precomputed filterbank/DCT tables for one configuration at one sample rate.
// compute() is const and allocates its own scratch, so one extractor can be
// shared between threads.
class MfccExtractor {
 public:
  MfccExtractor(int sample_rate_hz, const MfccConfig& cfg);
  ~MfccExtractor();
  MfccExtractor(const MfccExtractor&) = delete;
  MfccExtractor& operator=(const MfccExtractor&) = delete;

  std::size_t window_samples() const noexcept { return window_; }
  std::size_t hop_samples() const noexcept { return hop_; }
  std::size_t fft_size() const noexcept { return fft_size_; }
  std::size_t frame_count(std::size_t n_samples) const;

  // Rows are mel filters, columns FFT bins 0..fft_size/2.
  const Matrix& filterbank() const noexcept { return filterbank_; }
  std::vector<double> filter_centers_hz() const;

  // Per-frame log mel energies (frames x n_mel_filters).
  Matrix log_mel_energies(std::span<const double> samples) const;

  // Statics followed by deltas (frames x 2*n_cepstra).
  FeatureSequence compute(std::span<const double> samples) const;

 private:
  struct Plan;
  MfccConfig cfg_;
  int rate_;
  std::size_t window_, hop_, fft_size_;
  std::vector<double> hamming_;
  Matrix filterbank_;
  Matrix dct_;
  std::unique_ptr<Plan> plan_;
};

// Only 16 kHz input is accepted.
FeatureSequence extract_mfcc(std::span<const double> samples, int sample_rate_hz,
                             const MfccConfig& cfg = {});

// Regression deltas over +-window frames with edge replication.
Matrix compute_deltas(const Matrix& statics, int window);

// Per-frame pitch estimate from the normalized autocorrelation peak in
// [f0_min, f0_max]. Returns 0 for frames whose peak is below the threshold.
struct PitchTrack {
  std::vector<double> f0_hz;
  std::vector<bool> voiced;
  std::vector<double> log_energy;
};

PitchTrack track_pitch(std::span<const double> samples, int sample_rate_hz,
                       std::size_t n_frames, double frame_period_s,
                       const ProsodyConfig& cfg);

// One vector per block of `block_frames` acoustic frames (the last block may
// be shorter): [mean F0 of voiced frames or 0, voiced fraction, mean log
// energy, log block duration in seconds].
FeatureSequence extract_prosody(std::span<const double> samples, int sample_rate_hz,
                                const FeatureSequence& acoustic,
                                const ProsodyConfig& cfg = {});

inline constexpr std::size_t kProsodyDim = 4;

// Feature cache file, little-endian:
//   char[4]  magic "TCFC"
//   uint32   version (1)
//   uint32   kind (0 acoustic, 1 prosodic)
//   uint32   dim
//   uint64   frame count
//   float64  frame period in seconds
//   float32  frames, row-major (frame count x dim)
void write_feature_cache(const std::filesystem::path& path, const FeatureSequence& seq);
FeatureSequence read_feature_cache(const std::filesystem::path& path);

// File name for a (audio path, config text) pair: 16 hex digits of FNV-1a.
std::string feature_cache_key(const std::filesystem::path& audio,
                              std::string_view config_text);

}  // namespace talkcond
