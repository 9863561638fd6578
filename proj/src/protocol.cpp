#include "talkcond/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <string>
#include <thread>

#include "talkcond/error.hpp"
#include "talkcond/parallel.hpp"
#include "talkcond/wav.hpp"

namespace talkcond {

std::uint64_t condition_seed(std::uint64_t seed, std::size_t condition_index) {
  std::uint64_t x = seed ^ (0x9e3779b97f4a7c15ULL * (condition_index + 1));
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

namespace {

FeatureSequence cached(const std::filesystem::path& cache_dir, const std::filesystem::path& audio,
                       const std::string& config_text, const auto& compute) {
  if (cache_dir.empty()) return compute();
  const auto file = cache_dir / (feature_cache_key(audio, config_text) + ".tcfc");
  if (std::filesystem::exists(file)) return read_feature_cache(file);
  FeatureSequence seq = compute();
  // Write to a unique temporary name first so concurrent runs never see a
  // partial file.
  auto tmp = file;
  tmp += ".tmp" + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()));
  write_feature_cache(tmp, seq);
  std::filesystem::rename(tmp, file);
  return seq;
}

}  // namespace

std::vector<UtteranceFeatures> compute_features(const CorpusManifest& manifest,
                                                std::span<const std::size_t> indices,
                                                const MfccConfig& mfcc,
                                                const ProsodyConfig& prosody, bool with_prosody,
                                                std::size_t workers,
                                                const std::filesystem::path& cache_dir) {
  mfcc.validate();
  if (with_prosody) prosody.validate(manifest.sample_rate_hz);
  if (!cache_dir.empty()) std::filesystem::create_directories(cache_dir);
  const MfccExtractor extractor(manifest.sample_rate_hz, mfcc);
  const std::string mfcc_text = mfcc.to_string();
  const std::string prosody_text = mfcc_text + "\n" + prosody.to_string();
  std::vector<UtteranceFeatures> out(manifest.utterances.size());
  parallel_for(indices.size(), workers, [&](std::size_t n) {
    const std::size_t idx = indices[n];
    const Utterance& u = manifest.utterances.at(idx);
    std::vector<double> samples;
    const auto load = [&] {
      if (samples.empty()) {
        const PcmAudio audio = read_wav(u.audio_path);
        if (audio.sample_rate_hz != manifest.sample_rate_hz) {
          throw FeatureError(u.audio_path.string() + ": sample rate " +
                             std::to_string(audio.sample_rate_hz) + " differs from manifest");
        }
        samples = to_double(audio.samples);
      }
      return std::span<const double>(samples);
    };
    try {
      out[idx].acoustic =
          cached(cache_dir, u.audio_path, mfcc_text, [&] { return extractor.compute(load()); });
      if (out[idx].acoustic.size() == 0) throw FeatureError("audio shorter than one frame");
      if (with_prosody) {
        out[idx].prosodic = cached(cache_dir, u.audio_path, prosody_text, [&] {
          return extract_prosody(load(), manifest.sample_rate_hz, out[idx].acoustic, prosody);
        });
      }
    } catch (const Error& e) {
      throw FeatureError(u.audio_path.string() + ": " + e.what());
    }
  });
  return out;
}

ModelBank train_bank(const CorpusManifest& manifest, std::span<const std::size_t> train_indices,
                     std::span<const UtteranceFeatures> features, const ProtocolConfig& cfg,
                     std::vector<ConditionTrainLog>* log) {
  const ConditionSet& set = manifest.condition_set;
  const std::size_t K = set.size();
  std::vector<std::vector<std::size_t>> per_condition(K);
  for (std::size_t idx : train_indices) {
    per_condition[manifest.condition_index(manifest.utterances.at(idx))].push_back(idx);
  }
  for (std::size_t v = 0; v < K; ++v) {
    if (per_condition[v].empty()) {
      throw TrainingError("condition '" + set.labels[v] + "' has no training utterances");
    }
  }

  TrainOptions train = cfg.train;
  train.workers = 1;
  std::vector<Hmm1Model> hmms(cfg.kind == ModelKind::kChmm2 ? 0 : K);
  std::vector<Chmm2Model> chmms(cfg.kind == ModelKind::kChmm2 ? K : 0);
  std::vector<SphmmModel> sphmms(cfg.kind == ModelKind::kSphmm ? K : 0);
  std::vector<ConditionTrainLog> logs(K);

  parallel_for(K, cfg.workers, [&](std::size_t v) {
    std::vector<FeatureSequence> acoustic;
    for (std::size_t idx : per_condition[v]) acoustic.push_back(features[idx].acoustic);
    HmmInitOptions init;
    init.n_states = cfg.n_states;
    init.n_mix = cfg.n_mix;
    init.max_jump = cfg.max_jump;
    init.kmeans_iters = cfg.kmeans_iters;
    init.seed = condition_seed(cfg.seed, v);
    logs[v].label = set.labels[v];
    logs[v].n_utterances = acoustic.size();
    try {
      if (cfg.kind == ModelKind::kChmm2) {
        auto r = train_chmm2(init_chmm2(init, acoustic, train), acoustic, train);
        chmms[v] = std::move(r.model);
        logs[v].acoustic = std::move(r.trace);
        return;
      }
      auto r = train_baum_welch(init_hmm(init, acoustic, train), acoustic, train);
      logs[v].acoustic = std::move(r.trace);
      if (cfg.kind == ModelKind::kSphmm) {
        std::vector<FeatureSequence> prosodic;
        for (std::size_t idx : per_condition[v]) prosodic.push_back(features[idx].prosodic);
        SphmmOptions so = cfg.sphmm;
        so.seed = condition_seed(cfg.seed ^ 0x5bd1e995ULL, v);
        sphmms[v] = train_sphmm(r.model, prosodic, so, train, &logs[v].prosodic);
      } else {
        hmms[v] = std::move(r.model);
      }
    } catch (const Error& e) {
      throw TrainingError("condition '" + set.labels[v] + "': " + e.what());
    }
  });

  ModelBank bank;
  bank.condition_set = set;
  bank.mfcc = cfg.mfcc;
  bank.prosody = cfg.prosody;
  switch (cfg.kind) {
    case ModelKind::kHmm: bank.models = std::move(hmms); break;
    case ModelKind::kChmm2: bank.models = std::move(chmms); break;
    case ModelKind::kSphmm: bank.models = std::move(sphmms); break;
  }
  bank.validate();
  if (log) *log = std::move(logs);
  return bank;
}

namespace {

Evaluation finish(ModelKind kind, std::optional<double> alpha, const std::vector<std::string>& labels,
                  std::vector<Decision> decisions) {
  Evaluation ev;
  ev.report = make_report(kind, alpha, labels, decisions, &ev.confusion);
  ev.decisions = std::move(decisions);
  return ev;
}

std::optional<double> bank_alpha(const ModelBank& bank) {
  if (bank.kind() != ModelKind::kSphmm) return std::nullopt;
  const auto& v = std::get<std::vector<SphmmModel>>(bank.models);
  return v.empty() ? std::nullopt : std::optional<double>(v.front().alpha);
}

}  // namespace

Evaluation evaluate_bank(const ModelBank& bank, const CorpusManifest& manifest,
                         std::span<const std::size_t> test_indices,
                         std::span<const UtteranceFeatures> features, std::size_t workers) {
  if (bank.condition_set != manifest.condition_set) {
    throw ModelError("bank condition set does not match the manifest");
  }
  std::vector<Decision> decisions(test_indices.size());
  parallel_for(test_indices.size(), workers, [&](std::size_t n) {
    const std::size_t idx = test_indices[n];
    const Utterance& u = manifest.utterances.at(idx);
    decisions[n] = {idx, manifest.condition_index(u), identify(bank, features[idx]), u.gender};
  });
  return finish(bank.kind(), bank_alpha(bank), bank.condition_set.labels, std::move(decisions));
}

namespace {

void check_disjoint(std::span<const std::size_t> train, std::span<const std::size_t> test) {
  std::vector<std::size_t> a(train.begin(), train.end()), b(test.begin(), test.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::vector<std::size_t> both;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(both));
  if (!both.empty()) throw CorpusError("train and test utterances overlap");
}

}  // namespace

ProtocolResult run_protocol(const CorpusManifest& manifest, const SplitSpec& split,
                            const ProtocolConfig& cfg) {
  split.validate();
  const auto train = train_indices(manifest, split);
  const auto test = test_indices(manifest, split);
  check_disjoint(train, test);
  if (test.empty()) throw CorpusError("split selects no test utterances");
  std::vector<std::size_t> all(train);
  all.insert(all.end(), test.begin(), test.end());
  const auto features = compute_features(manifest, all, cfg.mfcc, cfg.prosody,
                                         cfg.kind == ModelKind::kSphmm, cfg.workers, cfg.cache_dir);
  ProtocolResult result;
  result.bank = train_bank(manifest, train, features, cfg, &result.log);
  result.evaluation = evaluate_bank(result.bank, manifest, test, features, cfg.workers);
  return result;
}

std::vector<SweepRow> alpha_sweep(const ModelBank& bank, const CorpusManifest& manifest,
                                  std::span<const std::size_t> test_indices,
                                  std::span<const UtteranceFeatures> features,
                                  std::span<const double> alphas, std::size_t workers) {
  if (bank.kind() != ModelKind::kSphmm) throw ModelError("alpha sweep needs an sphmm bank");
  if (bank.condition_set != manifest.condition_set) {
    throw ModelError("bank condition set does not match the manifest");
  }
  for (double a : alphas) check_alpha(a);
  const auto& models = std::get<std::vector<SphmmModel>>(bank.models);
  const std::size_t K = models.size();
  // Component scores per test utterance: [acoustic..., prosodic...].
  std::vector<std::vector<double>> scores(test_indices.size());
  parallel_for(test_indices.size(), workers, [&](std::size_t n) {
    const auto& f = features[test_indices[n]];
    if (f.acoustic.dim() != bank.acoustic_dim()) throw ModelError("feature dimension mismatch");
    auto& s = scores[n];
    s.resize(2 * K);
    for (std::size_t v = 0; v < K; ++v) {
      s[v] = log_likelihood(models[v].acoustic, f.acoustic);
      s[K + v] = log_likelihood(models[v].prosodic, f.prosodic);
    }
  });

  const auto& labels = bank.condition_set.labels;
  const auto neutral = bank.condition_set.index_of("neutral");
  std::vector<SweepRow> rows;
  for (double alpha : alphas) {
    std::vector<Decision> decisions(test_indices.size());
    std::vector<double> fused(K);
    for (std::size_t n = 0; n < test_indices.size(); ++n) {
      const std::size_t idx = test_indices[n];
      for (std::size_t v = 0; v < K; ++v) fused[v] = fuse_scores(alpha, scores[n][v], scores[n][K + v]);
      const Utterance& u = manifest.utterances[idx];
      decisions[n] = {idx, manifest.condition_index(u), argmax_score(fused), u.gender};
    }
    SweepRow row;
    row.alpha = alpha;
    row.evaluation = finish(ModelKind::kSphmm, alpha, labels, std::move(decisions));
    const auto& pct = row.evaluation.report.average_row().per_condition;
    row.average_all = row.evaluation.report.average;
    std::vector<double> rest;
    for (std::size_t v = 0; v < pct.size(); ++v) {
      if (!neutral || v != *neutral) rest.push_back(pct[v]);
    }
    row.average_excluding_neutral = rest.empty() ? row.average_all : average_performance(rest);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<SweepRow> alpha_sweep(const CorpusManifest& manifest, const SplitSpec& split,
                                  std::span<const double> alphas, ProtocolConfig cfg) {
  for (double a : alphas) check_alpha(a);
  cfg.kind = ModelKind::kSphmm;
  split.validate();
  const auto train = train_indices(manifest, split);
  const auto test = test_indices(manifest, split);
  check_disjoint(train, test);
  std::vector<std::size_t> all(train);
  all.insert(all.end(), test.begin(), test.end());
  const auto features =
      compute_features(manifest, all, cfg.mfcc, cfg.prosody, true, cfg.workers, cfg.cache_dir);
  const ModelBank bank = train_bank(manifest, train, features, cfg);
  return alpha_sweep(bank, manifest, test, features, alphas, cfg.workers);
}

std::vector<double> parse_alpha_range(std::string_view spec) {
  const std::string s(spec);
  const auto c1 = s.find(':');
  const auto c2 = c1 == std::string::npos ? std::string::npos : s.find(':', c1 + 1);
  const auto bad = [&] { return ModelError("alpha range must be start:stop:step, got '" + s + "'"); };
  if (c2 == std::string::npos) throw bad();
  const auto num = [&](const std::string& t) {
    char* end = nullptr;
    const double v = std::strtod(t.c_str(), &end);
    if (t.empty() || *end != '\0') throw bad();
    return v;
  };
  const double a = num(s.substr(0, c1)), b = num(s.substr(c1 + 1, c2 - c1 - 1)),
               step = num(s.substr(c2 + 1));
  if (!(step > 0.0) || b < a) throw bad();
  std::vector<double> out;
  const auto n = static_cast<std::size_t>(std::floor((b - a) / step + 0.5));
  for (std::size_t i = 0; i <= n; ++i) {
    // Round to 12 decimals so 0.1 steps print and compare cleanly.
    const double v = std::round((a + i * step) * 1e12) / 1e12;
    check_alpha(v);
    out.push_back(v);
  }
  return out;
}

}  // namespace talkcond
