#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "talkcond/corpus.hpp"
#include "talkcond/error.hpp"
#include "talkcond/wav.hpp"

namespace talkcond {
namespace fs = std::filesystem;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t stream_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> key) {
  std::uint64_t h = splitmix(seed);
  for (std::uint64_t k : key) h = splitmix(h ^ k);
  return h;
}

// Two-pole resonator (Klatt form), unity gain at DC.
class Resonator {
 public:
  void set(double freq, double bw, double rate) {
    const double t = 1.0 / rate;
    c_ = -std::exp(-kTwoPi * bw * t);
    b_ = 2.0 * std::exp(-std::numbers::pi * bw * t) * std::cos(kTwoPi * freq * t);
    a_ = 1.0 - b_ - c_;
  }
  double operator()(double x) {
    const double y = a_ * x + b_ * y1_ + c_ * y2_;
    y2_ = y1_;
    y1_ = y;
    return y;
  }

 private:
  double a_ = 1.0, b_ = 0.0, c_ = 0.0, y1_ = 0.0, y2_ = 0.0;
};

struct Vowel {
  double f1, f2, f3;
};

// Rough adult male formants for /a e i o u ae/.
constexpr std::array<Vowel, 6> kVowels{{{730, 1090, 2440},
                                        {530, 1840, 2480},
                                        {270, 2290, 3010},
                                        {570, 840, 2410},
                                        {300, 870, 2240},
                                        {660, 1720, 2410}}};

struct Syllable {
  std::size_t vowel;
  double onset_s;     // fricative onset length
  double onset_freq;  // fricative noise center
  double nucleus_s;   // voiced length
  double accent;      // pitch accent multiplier
};

// The "text" of a sentence: fixed per sentence id, shared by every speaker and
// condition.
std::vector<Syllable> sentence_syllables(std::uint64_t seed, int sentence) {
  std::mt19937_64 rng(stream_seed(seed, {0x5e47e4ceULL, static_cast<std::uint64_t>(sentence)}));
  std::uniform_int_distribution<int> count(4, 7);
  std::uniform_int_distribution<std::size_t> vowel(0, kVowels.size() - 1);
  std::uniform_real_distribution<double> onset(0.03, 0.07);
  std::uniform_real_distribution<double> freq(2500.0, 5500.0);
  std::uniform_real_distribution<double> nucleus(0.11, 0.20);
  std::uniform_real_distribution<double> accent(0.97, 1.08);
  std::vector<Syllable> out(count(rng));
  for (auto& s : out) s = {vowel(rng), onset(rng), freq(rng), nucleus(rng), accent(rng)};
  return out;
}

struct SpeakerTraits {
  Gender gender;
  double pitch_factor;
  double formant_factor;
};

SpeakerTraits speaker_traits(const SyntheticSpec& spec, int speaker) {
  std::mt19937_64 rng(stream_seed(spec.seed, {0x5beaca5ULL, static_cast<std::uint64_t>(speaker)}));
  std::uniform_real_distribution<double> spread(-spec.speaker_pitch_spread,
                                                spec.speaker_pitch_spread);
  std::uniform_real_distribution<double> formant(-0.04, 0.04);
  const Gender g = speaker % 2 == 0 ? Gender::kMale : Gender::kFemale;
  const double base = g == Gender::kFemale ? spec.female_pitch_factor : 1.0;
  const double fbase = g == Gender::kFemale ? 1.12 : 1.0;
  return {g, base * (1.0 + spread(rng)), fbase * (1.0 + formant(rng))};
}

std::string speaker_id(int speaker, int total) {
  char buf[16];
  std::snprintf(buf, sizeof buf, total > 99 ? "s%03d" : "s%02d", speaker + 1);
  return buf;
}

void check_spec(const SyntheticSpec& spec) {
  if (spec.conditions.empty()) throw CorpusError("synthetic spec has no conditions");
  if (spec.speakers < 1 || spec.sentences < 1 || spec.repetitions < 1) {
    throw CorpusError("synthetic spec needs >= 1 speaker, sentence and repetition");
  }
  if (spec.sample_rate_hz < 8000) throw CorpusError("synthetic sample rate too low");
  for (const auto& c : spec.conditions) {
    if (c.label.empty()) throw CorpusError("synthetic condition without a label");
    if (!(c.pitch_lo_hz > 0 && c.pitch_hi_hz >= c.pitch_lo_hz) ||
        !(c.amp_lo > 0 && c.amp_hi >= c.amp_lo && c.amp_hi < 1.0) || !(c.rate > 0) ||
        !(c.noise >= 0) || !(c.formant_shift > 0) || !(c.tilt >= 0 && c.tilt < 1)) {
      throw CorpusError("synthetic condition '" + c.label + "' has invalid parameters");
    }
  }
}

}  // namespace

std::vector<std::int16_t> synthesize_clip(const SyntheticSpec& spec, std::size_t condition,
                                          int speaker, int sentence, int repetition) {
  check_spec(spec);
  const ConditionVoice& voice = spec.conditions.at(condition);
  const SpeakerTraits traits = speaker_traits(spec, speaker);
  const auto syllables = sentence_syllables(spec.seed, sentence);
  const double rate = spec.sample_rate_hz;

  std::mt19937_64 rng(stream_seed(
      spec.seed, {0xc11bULL, condition, static_cast<std::uint64_t>(speaker),
                  static_cast<std::uint64_t>(sentence), static_cast<std::uint64_t>(repetition)}));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const double f0_start =
      traits.pitch_factor * (voice.pitch_lo_hz + unit(rng) * (voice.pitch_hi_hz - voice.pitch_lo_hz));
  const double amp = voice.amp_lo + unit(rng) * (voice.amp_hi - voice.amp_lo);
  const double tempo = voice.rate * (0.95 + 0.1 * unit(rng));
  const double fscale = traits.formant_factor * voice.formant_shift;

  std::vector<double> sig;
  const auto silence = [&](double seconds) {
    sig.resize(sig.size() + static_cast<std::size_t>(seconds * rate), 0.0);
  };

  silence(0.08);
  std::vector<std::pair<std::size_t, std::size_t>> voiced_spans;
  double total_s = 0.0;
  for (const auto& s : syllables) total_s += (s.onset_s + s.nucleus_s) * tempo;
  double elapsed = 0.0;
  double phase = 1.0;
  double tilt_state = 0.0;

  for (const auto& syl : syllables) {
    // Fricative onset: noise through one broad resonance.
    Resonator fric;
    fric.set(std::min(syl.onset_freq, 0.45 * rate), 900.0, rate);
    const auto n_onset = static_cast<std::size_t>(syl.onset_s * tempo * rate);
    for (std::size_t i = 0; i < n_onset; ++i) sig.push_back(0.25 * fric(gauss(rng)));
    elapsed += syl.onset_s * tempo;

    // Voiced nucleus: glottal pulse train with declining pitch through a
    // formant cascade, plus aspiration noise.
    const Vowel& v = kVowels[syl.vowel];
    std::array<Resonator, 3> formants;
    formants[0].set(v.f1 * fscale, 80.0, rate);
    formants[1].set(v.f2 * fscale, 100.0, rate);
    formants[2].set(std::min(v.f3 * fscale, 0.45 * rate), 140.0, rate);
    const auto n_nuc = static_cast<std::size_t>(syl.nucleus_s * tempo * rate);
    const std::size_t start = sig.size();
    for (std::size_t i = 0; i < n_nuc; ++i) {
      const double t = elapsed + i / rate;
      const double f0 = f0_start * syl.accent * (1.0 - 0.15 * t / total_s);
      phase += f0 / rate;
      double pulse = 0.0;
      if (phase >= 1.0) {
        phase -= 1.0;
        pulse = 1.0;
      }
      tilt_state = voice.tilt * tilt_state + pulse;
      double x = tilt_state + voice.noise * gauss(rng);
      for (auto& f : formants) x = f(x);
      // Short raised-cosine ramps keep segment edges click free.
      const double edge = std::min({1.0, i / (0.01 * rate), (n_nuc - i) / (0.01 * rate)});
      sig.push_back(x * edge);
    }
    voiced_spans.emplace_back(start, sig.size());
    elapsed += syl.nucleus_s * tempo;
  }
  silence(0.08);

  // Peak-normalize the voiced part to the condition amplitude.
  double peak = 0.0;
  for (const auto& [b, e] : voiced_spans) {
    for (std::size_t i = b; i < e; ++i) peak = std::max(peak, std::abs(sig[i]));
  }
  const double gain = peak > 0.0 ? amp / peak : 0.0;
  std::vector<std::int16_t> pcm(sig.size());
  for (std::size_t i = 0; i < sig.size(); ++i) {
    const double dither = 2e-4 * gauss(rng);
    const double y = std::clamp(sig[i] * gain + dither, -1.0, 32767.0 / 32768.0);
    pcm[i] = static_cast<std::int16_t>(std::lround(y * 32768.0));
  }
  return pcm;
}

CorpusManifest generate_synthetic(const SyntheticSpec& spec, const fs::path& out_dir) {
  check_spec(spec);
  std::error_code ec;
  fs::create_directories(out_dir / "wav", ec);
  if (ec || !fs::is_directory(out_dir / "wav")) {
    throw CorpusError("cannot create output directory " + (out_dir / "wav").string() +
                      (ec ? ": " + ec.message() : ""));
  }

  CorpusManifest m;
  m.condition_set.name = spec.set_name;
  for (const auto& c : spec.conditions) m.condition_set.labels.push_back(c.label);
  m.condition_set.validate();
  m.sample_rate_hz = spec.sample_rate_hz;

  for (int spk = 0; spk < spec.speakers; ++spk) {
    const std::string id = speaker_id(spk, spec.speakers);
    const Gender gender = speaker_traits(spec, spk).gender;
    for (int sen = 1; sen <= spec.sentences; ++sen) {
      for (std::size_t c = 0; c < spec.conditions.size(); ++c) {
        for (int rep = 1; rep <= spec.repetitions; ++rep) {
          const std::string name = id + "_" + std::to_string(sen) + "_" +
                                   spec.conditions[c].label + "_" + std::to_string(rep) +
                                   ".wav";
          const fs::path rel = fs::path("wav") / name;
          write_wav(out_dir / rel,
                    {spec.sample_rate_hz, synthesize_clip(spec, c, spk, sen, rep)});
          m.utterances.push_back(
              {fs::absolute(out_dir / rel), id, gender, sen, spec.conditions[c].label, rep});
        }
      }
    }
  }
  save_manifest(m, out_dir / "manifest.tsv");
  return m;
}

SyntheticSpec SyntheticSpec::stress_preset() {
  SyntheticSpec s;
  s.set_name = "stress";
  s.conditions = {
      {"neutral", 105, 118, 0.18, 0.22, 1.00, 0.02, 1.00, 0.60},
      {"shouted", 230, 255, 0.80, 0.88, 0.95, 0.05, 1.15, 0.20},
      {"slow", 95, 105, 0.10, 0.13, 1.80, 0.02, 0.90, 0.90},
      {"loud", 150, 165, 0.45, 0.52, 1.00, 0.02, 1.06, 0.35},
      {"soft", 90, 100, 0.03, 0.04, 1.05, 0.20, 0.95, 0.80},
      {"fast", 125, 138, 0.30, 0.35, 0.55, 0.12, 0.93, 0.45},
  };
  return s;
}

SyntheticSpec SyntheticSpec::emotion_preset() {
  SyntheticSpec s;
  s.set_name = "emotion";
  s.conditions = {
      {"neutral", 108, 120, 0.20, 0.24, 1.00, 0.02, 1.00, 0.60},
      {"angry", 200, 230, 0.70, 0.80, 0.85, 0.04, 1.10, 0.25},
      {"sad", 85, 96, 0.08, 0.10, 1.45, 0.06, 0.95, 0.85},
      {"happy", 175, 200, 0.40, 0.46, 0.90, 0.02, 1.05, 0.40},
      {"disgust", 120, 134, 0.28, 0.33, 1.20, 0.10, 0.92, 0.70},
      {"fear", 250, 285, 0.22, 0.26, 0.75, 0.08, 1.08, 0.50},
  };
  return s;
}

SyntheticSpec SyntheticSpec::prosody_only_preset() {
  SyntheticSpec s;
  s.set_name = "prosody";
  s.speaker_pitch_spread = 0.03;
  s.female_pitch_factor = 1.0;
  s.conditions = {
      {"low", 100, 108, 0.30, 0.32, 1.00, 0.02, 1.00},
      {"low_slow", 100, 108, 0.30, 0.32, 1.60, 0.02, 1.00},
      {"mid", 140, 150, 0.30, 0.32, 1.00, 0.02, 1.00},
      {"mid_slow", 140, 150, 0.30, 0.32, 1.60, 0.02, 1.00},
      {"high", 195, 210, 0.30, 0.32, 1.00, 0.02, 1.00},
      {"high_fast", 195, 210, 0.30, 0.32, 0.65, 0.02, 1.00},
  };
  return s;
}

SyntheticSpec SyntheticSpec::paper_shaped(SyntheticSpec base) {
  base.speakers = 30;
  base.sentences = 8;
  base.repetitions = 9;
  return base;
}

}  // namespace talkcond
