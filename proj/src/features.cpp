#include "talkcond/features.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <mutex>
#include <numbers>
#include <sstream>

#include "talkcond/error.hpp"
#include "talkcond/kernels.hpp"

namespace talkcond {
namespace {

// FFTW's planner is not thread-safe; execution with new arrays is.
std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

template <typename T>
struct FftwFree {
  void operator()(T* p) const { fftw_free(p); }
};
template <typename T>
using FftwBuffer = std::unique_ptr<T[], FftwFree<T>>;

template <typename T>
FftwBuffer<T> fftw_alloc(std::size_t n) {
  return FftwBuffer<T>(static_cast<T*>(fftw_malloc(sizeof(T) * n)));
}

void check_finite(std::span<const double> samples) {
  for (double s : samples) {
    if (!std::isfinite(s)) throw FeatureError("non-finite input sample");
  }
}

}  // namespace

const char* feature_kind_name(FeatureKind k) {
  return k == FeatureKind::kAcoustic ? "acoustic" : "prosodic";
}

void FeatureSequence::validate() const {
  if (!(frame_period_s > 0.0)) throw FeatureError("frame period must be positive");
  for (double v : frames.flat()) {
    if (!std::isfinite(v)) throw FeatureError("non-finite feature value");
  }
}

void MfccConfig::validate() const {
  if (!(hop_s > 0.0) || window_s < hop_s) throw FeatureError("need window_s >= hop_s > 0");
  if (n_mel_filters < 1 || n_cepstra < 1 || n_cepstra > n_mel_filters) {
    throw FeatureError("need 1 <= n_cepstra <= n_mel_filters");
  }
  if (delta_window < 1) throw FeatureError("delta_window must be >= 1");
  if (!(pre_emphasis >= 0.0 && pre_emphasis < 1.0)) {
    throw FeatureError("pre_emphasis must be in [0, 1)");
  }
  if (!(log_floor > 0.0)) throw FeatureError("log_floor must be positive");
}

std::string MfccConfig::to_string() const {
  std::ostringstream os;
  os.precision(17);
  os << "mfcc window_s=" << window_s << " hop_s=" << hop_s << " n_mel=" << n_mel_filters
     << " n_cepstra=" << n_cepstra << " delta_window=" << delta_window
     << " pre_emphasis=" << pre_emphasis << " log_floor=" << log_floor
     << " low_hz=" << low_freq_hz << " high_hz=" << high_freq_hz;
  return os.str();
}

void ProsodyConfig::validate(int rate) const {
  if (block_frames < 1) throw FeatureError("block_frames must be >= 1");
  if (!(f0_min_hz > 0.0 && f0_min_hz < f0_max_hz && f0_max_hz < rate / 2.0)) {
    throw FeatureError("need 0 < f0_min_hz < f0_max_hz < sample_rate/2");
  }
  if (!(voicing_threshold > 0.0 && voicing_threshold < 1.0)) {
    throw FeatureError("voicing_threshold must be in (0, 1)");
  }
  if (analysis_window_s * f0_min_hz < 1.0) {
    throw FeatureError("analysis window shorter than one period of f0_min_hz");
  }
}

std::string ProsodyConfig::to_string() const {
  std::ostringstream os;
  os.precision(17);
  os << "prosody block_frames=" << block_frames << " f0_min_hz=" << f0_min_hz
     << " f0_max_hz=" << f0_max_hz << " voicing_threshold=" << voicing_threshold
     << " analysis_window_s=" << analysis_window_s;
  return os.str();
}

double hz_to_mel(double hz) { return 1127.0 * std::log1p(hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * std::expm1(mel / 1127.0); }

struct MfccExtractor::Plan {
  fftw_plan plan = nullptr;
};

MfccExtractor::MfccExtractor(int rate, const MfccConfig& cfg) : cfg_(cfg), rate_(rate) {
  cfg_.validate();
  if (rate <= 0) throw FeatureError("sample rate must be positive");
  window_ = static_cast<std::size_t>(std::lround(cfg_.window_s * rate));
  hop_ = static_cast<std::size_t>(std::lround(cfg_.hop_s * rate));
  if (hop_ == 0 || window_ < hop_) throw FeatureError("window/hop too short for sample rate");
  fft_size_ = next_pow2(window_);

  hamming_.resize(window_);
  for (std::size_t i = 0; i < window_; ++i) {
    hamming_[i] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * i / (window_ - 1.0));
  }

  const double nyquist = rate / 2.0;
  const double high = cfg_.high_freq_hz > 0.0 ? std::min(cfg_.high_freq_hz, nyquist) : nyquist;
  if (!(cfg_.low_freq_hz >= 0.0 && cfg_.low_freq_hz < high)) {
    throw FeatureError("mel band must satisfy 0 <= low < high <= Nyquist");
  }
  const auto n_mel = static_cast<std::size_t>(cfg_.n_mel_filters);
  const std::size_t n_bins = fft_size_ / 2 + 1;
  const double mel_lo = hz_to_mel(cfg_.low_freq_hz);
  const double mel_step = (hz_to_mel(high) - mel_lo) / (n_mel + 1);
  filterbank_ = Matrix(n_mel, n_bins);
  for (std::size_t m = 0; m < n_mel; ++m) {
    const double left = mel_lo + m * mel_step;
    const double center = left + mel_step;
    const double right = center + mel_step;
    for (std::size_t k = 0; k < n_bins; ++k) {
      const double mel = hz_to_mel(static_cast<double>(k) * rate / fft_size_);
      if (mel > left && mel < right) {
        filterbank_(m, k) = mel <= center ? (mel - left) / (center - left)
                                          : (right - mel) / (right - center);
      }
    }
  }

  // Orthonormal DCT-II rows for c0..c(n_cepstra-1).
  const auto n_cep = static_cast<std::size_t>(cfg_.n_cepstra);
  dct_ = Matrix(n_cep, n_mel);
  for (std::size_t c = 0; c < n_cep; ++c) {
    const double scale = std::sqrt((c == 0 ? 1.0 : 2.0) / n_mel);
    for (std::size_t m = 0; m < n_mel; ++m) {
      dct_(c, m) = scale * std::cos(std::numbers::pi * c * (m + 0.5) / n_mel);
    }
  }

  plan_ = std::make_unique<Plan>();
  auto in = fftw_alloc<double>(fft_size_);
  auto out = fftw_alloc<fftw_complex>(n_bins);
  std::lock_guard lock(fftw_planner_mutex());
  plan_->plan = fftw_plan_dft_r2c_1d(static_cast<int>(fft_size_), in.get(), out.get(),
                                     FFTW_ESTIMATE);
  if (!plan_->plan) throw FeatureError("FFT planning failed");
}

MfccExtractor::~MfccExtractor() {
  if (plan_ && plan_->plan) {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(plan_->plan);
  }
}

std::size_t MfccExtractor::frame_count(std::size_t n) const {
  return n < window_ ? 0 : (n - window_) / hop_ + 1;
}

std::vector<double> MfccExtractor::filter_centers_hz() const {
  const double nyquist = rate_ / 2.0;
  const double high = cfg_.high_freq_hz > 0.0 ? std::min(cfg_.high_freq_hz, nyquist) : nyquist;
  const double mel_lo = hz_to_mel(cfg_.low_freq_hz);
  const double mel_step = (hz_to_mel(high) - mel_lo) / (cfg_.n_mel_filters + 1);
  std::vector<double> out(cfg_.n_mel_filters);
  for (std::size_t m = 0; m < out.size(); ++m) out[m] = mel_to_hz(mel_lo + (m + 1) * mel_step);
  return out;
}

Matrix MfccExtractor::log_mel_energies(std::span<const double> samples) const {
  check_finite(samples);
  const std::size_t n_frames = frame_count(samples.size());
  if (n_frames == 0) throw FeatureError("clip shorter than one analysis window");
  const std::size_t n_bins = fft_size_ / 2 + 1;
  auto in = fftw_alloc<double>(fft_size_);
  auto out = fftw_alloc<fftw_complex>(n_bins);
  std::vector<double> mag(n_bins);
  Matrix result(n_frames, filterbank_.rows());

  for (std::size_t t = 0; t < n_frames; ++t) {
    const double* x = samples.data() + t * hop_;
    for (std::size_t i = window_; i-- > 0;) {
      const double prev = i > 0 ? x[i - 1] : x[0];
      in[i] = (x[i] - cfg_.pre_emphasis * prev) * hamming_[i];
    }
    std::fill(in.get() + window_, in.get() + fft_size_, 0.0);
    fftw_execute_dft_r2c(plan_->plan, in.get(), out.get());
    for (std::size_t k = 0; k < n_bins; ++k) mag[k] = std::hypot(out[k][0], out[k][1]);
    for (std::size_t m = 0; m < filterbank_.rows(); ++m) {
      const double e = kernels::dot(filterbank_.row(m), mag);
      result(t, m) = std::log(std::max(e, cfg_.log_floor));
    }
  }
  return result;
}

FeatureSequence MfccExtractor::compute(std::span<const double> samples) const {
  const Matrix logmel = log_mel_energies(samples);
  const std::size_t n_cep = dct_.rows();
  Matrix statics(logmel.rows(), n_cep);
  for (std::size_t t = 0; t < logmel.rows(); ++t) {
    for (std::size_t c = 0; c < n_cep; ++c) statics(t, c) = kernels::dot(dct_.row(c), logmel.row(t));
  }
  const Matrix deltas = compute_deltas(statics, cfg_.delta_window);
  FeatureSequence seq;
  seq.kind = FeatureKind::kAcoustic;
  seq.frame_period_s = static_cast<double>(hop_) / rate_;
  seq.frames = Matrix(statics.rows(), 2 * n_cep);
  for (std::size_t t = 0; t < statics.rows(); ++t) {
    auto row = seq.frames.row(t);
    std::copy_n(statics.row(t).begin(), n_cep, row.begin());
    std::copy_n(deltas.row(t).begin(), n_cep, row.begin() + n_cep);
  }
  return seq;
}

Matrix compute_deltas(const Matrix& statics, int window) {
  const std::size_t T = statics.rows();
  const std::size_t D = statics.cols();
  double denom = 0.0;
  for (int n = 1; n <= window; ++n) denom += 2.0 * n * n;
  Matrix out(T, D);
  for (std::size_t t = 0; t < T; ++t) {
    for (int n = 1; n <= window; ++n) {
      const std::size_t fwd = std::min(t + n, T - 1);
      const std::size_t back = t >= static_cast<std::size_t>(n) ? t - n : 0;
      for (std::size_t d = 0; d < D; ++d) {
        out(t, d) += n * (statics(fwd, d) - statics(back, d));
      }
    }
    for (std::size_t d = 0; d < D; ++d) out(t, d) /= denom;
  }
  return out;
}

FeatureSequence extract_mfcc(std::span<const double> samples, int rate, const MfccConfig& cfg) {
  if (rate != 16000) {
    throw FeatureError("only 16000 Hz audio is supported, got " + std::to_string(rate));
  }
  return MfccExtractor(rate, cfg).compute(samples);
}

PitchTrack track_pitch(std::span<const double> samples, int rate, std::size_t n_frames,
                       double frame_period_s, const ProsodyConfig& cfg) {
  cfg.validate(rate);
  check_finite(samples);
  const auto hop = static_cast<std::size_t>(std::lround(frame_period_s * rate));
  const auto win = static_cast<std::size_t>(std::lround(cfg.analysis_window_s * rate));
  const auto min_lag = static_cast<std::size_t>(std::floor(rate / cfg.f0_max_hz));
  const auto max_lag = static_cast<std::size_t>(std::ceil(rate / cfg.f0_min_hz));
  if (win <= max_lag + 1) throw FeatureError("analysis window too short for f0_min_hz");

  PitchTrack track;
  track.f0_hz.assign(n_frames, 0.0);
  track.voiced.assign(n_frames, false);
  track.log_energy.assign(n_frames, 0.0);
  std::vector<double> r(max_lag + 2, 0.0);

  for (std::size_t t = 0; t < n_frames; ++t) {
    // Window starts at the frame start, pulled back at the end of the clip.
    std::size_t start = t * hop;
    std::size_t len = win;
    if (start + len > samples.size()) {
      len = std::min(win, samples.size());
      start = samples.size() - len;
    }
    const std::span<const double> x = samples.subspan(start, len);
    const double energy = kernels::dot(x, x);
    track.log_energy[t] = std::log(energy / len + 1e-10);
    if (len <= max_lag + 1 || energy <= 1e-12 * len) continue;

    // Prefix sums of squares give both normalizing energies in O(1) per lag.
    std::vector<double> csum(len + 1, 0.0);
    for (std::size_t i = 0; i < len; ++i) csum[i + 1] = csum[i] + x[i] * x[i];
    std::fill(r.begin(), r.end(), 0.0);
    double best = -1.0;
    for (std::size_t lag = min_lag; lag <= max_lag + 1 && lag < len; ++lag) {
      const std::size_t n = len - lag;
      const double num = kernels::dot(x.first(n), x.subspan(lag, n));
      const double den = std::sqrt(csum[n] * (csum[len] - csum[lag]));
      r[lag] = den > 0.0 ? num / den : 0.0;
      if (lag <= max_lag) best = std::max(best, r[lag]);
    }
    if (best < cfg.voicing_threshold) continue;

    // Smallest-lag local peak close to the global maximum avoids picking a
    // multiple of the period. The margin covers integer-lag quantization when
    // the period is not a whole number of samples.
    std::size_t pick = 0;
    for (std::size_t lag = std::max<std::size_t>(min_lag, 1); lag <= max_lag; ++lag) {
      const bool local = r[lag] >= r[lag - 1] && r[lag] >= r[lag + 1];
      if (local && r[lag] >= 0.8 * best) {
        pick = lag;
        break;
      }
    }
    if (pick == 0 || r[pick] < cfg.voicing_threshold) continue;

    double lag = static_cast<double>(pick);
    const double a = r[pick - 1], b = r[pick], c = r[pick + 1];
    const double curv = a - 2.0 * b + c;
    if (pick > min_lag && curv < 0.0) lag += 0.5 * (a - c) / curv;
    track.voiced[t] = true;
    track.f0_hz[t] = rate / lag;
  }
  return track;
}

FeatureSequence extract_prosody(std::span<const double> samples, int rate,
                                const FeatureSequence& acoustic, const ProsodyConfig& cfg) {
  if (acoustic.size() == 0) throw FeatureError("acoustic sequence is empty");
  if (rate != 16000) {
    throw FeatureError("only 16000 Hz audio is supported, got " + std::to_string(rate));
  }
  const PitchTrack track =
      track_pitch(samples, rate, acoustic.size(), acoustic.frame_period_s, cfg);

  const auto block = static_cast<std::size_t>(cfg.block_frames);
  const std::size_t n_blocks = (acoustic.size() + block - 1) / block;
  FeatureSequence out;
  out.kind = FeatureKind::kProsodic;
  out.frame_period_s = acoustic.frame_period_s * block;
  out.frames = Matrix(n_blocks, kProsodyDim);
  for (std::size_t b = 0; b < n_blocks; ++b) {
    const std::size_t begin = b * block;
    const std::size_t end = std::min(begin + block, acoustic.size());
    double f0_sum = 0.0, energy_sum = 0.0;
    std::size_t voiced = 0;
    for (std::size_t t = begin; t < end; ++t) {
      energy_sum += track.log_energy[t];
      if (track.voiced[t]) {
        f0_sum += track.f0_hz[t];
        ++voiced;
      }
    }
    const double n = static_cast<double>(end - begin);
    out.frames(b, 0) = voiced ? f0_sum / voiced : 0.0;
    out.frames(b, 1) = voiced / n;
    out.frames(b, 2) = energy_sum / n;
    out.frames(b, 3) = std::log(n * acoustic.frame_period_s);
  }
  return out;
}

}  // namespace talkcond
