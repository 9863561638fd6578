#include "run_config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cstdio>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "talkcond/error.hpp"
#include "talkcond/parallel.hpp"

namespace talkcond::cli {

namespace pt = boost::property_tree;

namespace {

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error("config", what) {}
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t") - b + 1);
}

template <typename T>
T parse_value(const std::string& key, const std::string& raw) {
  std::istringstream in(trim(raw));
  T v{};
  in >> v;
  if (!in || !in.eof()) throw ConfigError("bad value '" + raw + "' for " + key);
  return v;
}

template <>
bool parse_value<bool>(const std::string& key, const std::string& raw) {
  const auto v = trim(raw);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("bad boolean '" + raw + "' for " + key);
}

template <>
std::string parse_value<std::string>(const std::string&, const std::string& raw) {
  return trim(raw);
}

std::string real_text(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string join(const auto& items) {
  std::ostringstream os;
  bool first = true;
  for (const auto& x : items) {
    os << (first ? "" : ",") << x;
    first = false;
  }
  return os.str();
}

}  // namespace

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

RunConfig default_config() {
  RunConfig cfg;
  cfg.protocol.workers = default_workers();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path, RunConfig cfg) {
  pt::ptree tree;
  try {
    pt::read_ini(path.string(), tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(e.what());
  }
  const auto base_dir = path.parent_path();
  // Blank stays blank; relative paths are taken from the config file's folder.
  const auto resolve = [&base_dir](const std::string& raw) {
    const auto v = trim(raw);
    return v.empty() ? std::filesystem::path{} : base_dir / std::filesystem::path(v);
  };
  auto& p = cfg.protocol;
  const auto ints = [](const std::string& key, const std::string& raw) {
    std::vector<int> out;
    for (const auto& s : split_list(raw)) out.push_back(parse_value<int>(key, s));
    return out;
  };
  using Setter = std::function<void(const std::string&, const std::string&)>;
  const auto set = [](auto& field) -> Setter {
    return [&field](const std::string& key, const std::string& raw) {
      field = parse_value<std::remove_reference_t<decltype(field)>>(key, raw);
    };
  };
  const auto set_opt = [](auto& field) -> Setter {
    return [&field](const std::string& key, const std::string& raw) {
      field = parse_value<typename std::remove_reference_t<decltype(field)>::value_type>(key, raw);
    };
  };
  const std::map<std::string, Setter> table = {
      {"corpus.manifest",
       [&](const std::string&, const std::string& raw) {
         cfg.manifest = resolve(raw);
       }},
      {"split.mode", set(cfg.split.mode)},
      {"split.train_speakers",
       [&](const std::string&, const std::string& raw) { cfg.split.train_speakers = split_list(raw); }},
      {"split.test_speakers",
       [&](const std::string&, const std::string& raw) { cfg.split.test_speakers = split_list(raw); }},
      {"split.train_sentences",
       [&](const std::string& k, const std::string& raw) { cfg.split.train_sentences = ints(k, raw); }},
      {"split.test_sentences",
       [&](const std::string& k, const std::string& raw) { cfg.split.test_sentences = ints(k, raw); }},
      {"model.kind",
       [&](const std::string&, const std::string& raw) { p.kind = parse_model_kind(trim(raw)); }},
      {"model.states", set(p.n_states)},
      {"model.mixtures", set(p.n_mix)},
      {"model.max_jump", set(p.max_jump)},
      {"model.kmeans_iters", set(p.kmeans_iters)},
      {"model.grouping", set(p.sphmm.grouping)},
      {"model.alpha", set(p.sphmm.alpha)},
      {"model.prosodic_mixtures", set(p.sphmm.prosodic_mix)},
      {"model.prosodic_max_jump", set(p.sphmm.prosodic_max_jump)},
      {"model.seed", set(p.seed)},
      {"train.max_iters", set(p.train.max_iters)},
      {"train.tol", set(p.train.tol)},
      {"train.variance_floor_rel", set(p.train.variance_floor_rel)},
      {"train.variance_floor_abs", set(p.train.variance_floor_abs)},
      {"train.workers", set(p.workers)},
      {"mfcc.window_s", set(p.mfcc.window_s)},
      {"mfcc.hop_s", set(p.mfcc.hop_s)},
      {"mfcc.n_mel_filters", set(p.mfcc.n_mel_filters)},
      {"mfcc.n_cepstra", set(p.mfcc.n_cepstra)},
      {"mfcc.delta_window", set(p.mfcc.delta_window)},
      {"mfcc.pre_emphasis", set(p.mfcc.pre_emphasis)},
      {"mfcc.log_floor", set(p.mfcc.log_floor)},
      {"mfcc.low_freq_hz", set(p.mfcc.low_freq_hz)},
      {"mfcc.high_freq_hz", set(p.mfcc.high_freq_hz)},
      {"prosody.block_frames", set(p.prosody.block_frames)},
      {"prosody.f0_min_hz", set(p.prosody.f0_min_hz)},
      {"prosody.f0_max_hz", set(p.prosody.f0_max_hz)},
      {"prosody.voicing_threshold", set(p.prosody.voicing_threshold)},
      {"prosody.analysis_window_s", set(p.prosody.analysis_window_s)},
      {"synth.preset", set(cfg.synth.preset)},
      {"synth.speakers", set_opt(cfg.synth.speakers)},
      {"synth.sentences", set_opt(cfg.synth.sentences)},
      {"synth.repetitions", set_opt(cfg.synth.repetitions)},
      {"synth.seed", set_opt(cfg.synth.seed)},
      {"synth.paper_shaped", set(cfg.synth.paper_shaped)},
      {"output.dir",
       [&](const std::string&, const std::string& raw) {
         cfg.output_dir = resolve(raw);
       }},
      {"output.cache_dir",
       [&](const std::string&, const std::string& raw) {
         p.cache_dir = resolve(raw);
       }},
  };
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ConfigError(path.string() + ": key '" + section + "' outside a section");
    for (const auto& [key, value] : body) {
      const std::string full = section + "." + key;
      const auto it = table.find(full);
      if (it == table.end()) throw ConfigError(path.string() + ": unknown key '" + full + "'");
      it->second(full, value.data());
    }
  }
  return cfg;
}

std::string config_to_ini(const RunConfig& cfg) {
  const auto& p = cfg.protocol;
  std::ostringstream os;
  os << "[corpus]\nmanifest = " << cfg.manifest.string() << "\n\n";
  os << "[split]\nmode = " << cfg.split.mode << "\n";
  if (cfg.split.mode == "explicit") {
    os << "train_speakers = " << join(cfg.split.train_speakers) << "\n";
    os << "test_speakers = " << join(cfg.split.test_speakers) << "\n";
    os << "train_sentences = " << join(cfg.split.train_sentences) << "\n";
    os << "test_sentences = " << join(cfg.split.test_sentences) << "\n";
  }
  os << "\n[model]\nkind = " << model_kind_name(p.kind) << "\nstates = " << p.n_states
     << "\nmixtures = " << p.n_mix << "\nmax_jump = " << p.max_jump
     << "\nkmeans_iters = " << p.kmeans_iters << "\ngrouping = " << p.sphmm.grouping
     << "\nalpha = " << real_text(p.sphmm.alpha) << "\nprosodic_mixtures = " << p.sphmm.prosodic_mix
     << "\nprosodic_max_jump = " << p.sphmm.prosodic_max_jump << "\nseed = " << p.seed << "\n\n";
  os << "[train]\nmax_iters = " << p.train.max_iters << "\ntol = " << real_text(p.train.tol)
     << "\nvariance_floor_rel = " << real_text(p.train.variance_floor_rel)
     << "\nvariance_floor_abs = " << real_text(p.train.variance_floor_abs)
     << "\nworkers = " << p.workers << "\n\n";
  os << "[mfcc]\nwindow_s = " << real_text(p.mfcc.window_s) << "\nhop_s = " << real_text(p.mfcc.hop_s)
     << "\nn_mel_filters = " << p.mfcc.n_mel_filters << "\nn_cepstra = " << p.mfcc.n_cepstra
     << "\ndelta_window = " << p.mfcc.delta_window
     << "\npre_emphasis = " << real_text(p.mfcc.pre_emphasis)
     << "\nlog_floor = " << real_text(p.mfcc.log_floor)
     << "\nlow_freq_hz = " << real_text(p.mfcc.low_freq_hz)
     << "\nhigh_freq_hz = " << real_text(p.mfcc.high_freq_hz) << "\n\n";
  os << "[prosody]\nblock_frames = " << p.prosody.block_frames
     << "\nf0_min_hz = " << real_text(p.prosody.f0_min_hz)
     << "\nf0_max_hz = " << real_text(p.prosody.f0_max_hz)
     << "\nvoicing_threshold = " << real_text(p.prosody.voicing_threshold)
     << "\nanalysis_window_s = " << real_text(p.prosody.analysis_window_s) << "\n\n";
  os << "[synth]\npreset = " << cfg.synth.preset << "\n";
  if (cfg.synth.speakers) os << "speakers = " << *cfg.synth.speakers << "\n";
  if (cfg.synth.sentences) os << "sentences = " << *cfg.synth.sentences << "\n";
  if (cfg.synth.repetitions) os << "repetitions = " << *cfg.synth.repetitions << "\n";
  if (cfg.synth.seed) os << "seed = " << *cfg.synth.seed << "\n";
  os << "paper_shaped = " << (cfg.synth.paper_shaped ? "true" : "false") << "\n\n";
  os << "[output]\ndir = " << cfg.output_dir.string() << "\ncache_dir = " << p.cache_dir.string()
     << "\n";
  return os.str();
}

void validate_config(const RunConfig& cfg) {
  const auto& p = cfg.protocol;
  const auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
  };
  require(p.n_states >= 1 && p.n_states <= 256, "model.states must be in [1, 256]");
  require(p.n_mix >= 1 && p.n_mix <= 256, "model.mixtures must be in [1, 256]");
  require(p.kmeans_iters >= 0, "model.kmeans_iters must be >= 0");
  require(p.sphmm.grouping >= 1, "model.grouping must be >= 1");
  require(p.sphmm.alpha >= 0.0 && p.sphmm.alpha <= 1.0, "model.alpha must be in [0, 1]");
  require(p.sphmm.prosodic_mix >= 1, "model.prosodic_mixtures must be >= 1");
  require(p.kind != ModelKind::kSphmm || p.n_states % p.sphmm.grouping == 0,
          "model.states must be divisible by model.grouping");
  require(p.train.max_iters >= 0, "train.max_iters must be >= 0");
  require(p.train.tol >= 0.0, "train.tol must be >= 0");
  require(p.train.variance_floor_rel >= 0.0 && p.train.variance_floor_abs > 0.0,
          "variance floors must be non-negative (absolute floor > 0)");
  require(p.workers >= 1, "train.workers must be >= 1");
  require(cfg.split.mode == "paper" || cfg.split.mode == "explicit",
          "split.mode must be paper or explicit");
  require(cfg.synth.preset == "stress" || cfg.synth.preset == "emotion" ||
              cfg.synth.preset == "prosody",
          "synth.preset must be stress, emotion or prosody");
  try {
    p.mfcc.validate();
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

SplitSpec resolve_split(const SplitConfig& split, const CorpusManifest& manifest) {
  if (split.mode == "paper") return paper_split(manifest);
  SplitSpec s;
  s.train_speakers = {split.train_speakers.begin(), split.train_speakers.end()};
  s.test_speakers = {split.test_speakers.begin(), split.test_speakers.end()};
  s.train_sentences = {split.train_sentences.begin(), split.train_sentences.end()};
  s.test_sentences = {split.test_sentences.begin(), split.test_sentences.end()};
  s.validate();
  return s;
}

SyntheticSpec synthetic_spec(const SynthConfig& synth) {
  SyntheticSpec spec = synth.preset == "emotion"   ? SyntheticSpec::emotion_preset()
                       : synth.preset == "prosody" ? SyntheticSpec::prosody_only_preset()
                                                   : SyntheticSpec::stress_preset();
  if (synth.paper_shaped) spec = SyntheticSpec::paper_shaped(spec);
  if (synth.speakers) spec.speakers = *synth.speakers;
  if (synth.sentences) spec.sentences = *synth.sentences;
  if (synth.repetitions) spec.repetitions = *synth.repetitions;
  if (synth.seed) spec.seed = *synth.seed;
  return spec;
}

}  // namespace talkcond::cli
