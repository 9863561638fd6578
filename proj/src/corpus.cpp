#include "talkcond/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <tuple>

#include "talkcond/error.hpp"

namespace talkcond {
namespace fs = std::filesystem;

namespace {

constexpr std::string_view kMagic = "#talkcond-manifest v1";
constexpr std::string_view kColumns =
    "audio_path\tspeaker_id\tgender\tsentence_id\tcondition\trepetition";

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    out.emplace_back(s.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

int parse_int(std::string_view s, std::string_view what, std::size_t line) {
  int v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw CorpusError("line " + std::to_string(line) + ": bad " + std::string(what) +
                      " '" + std::string(s) + "'");
  }
  return v;
}

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

}  // namespace

std::optional<std::size_t> ConditionSet::index_of(std::string_view label) const {
  const auto it = std::find(labels.begin(), labels.end(), label);
  if (it == labels.end()) return std::nullopt;
  return static_cast<std::size_t>(it - labels.begin());
}

void ConditionSet::validate() const {
  if (labels.empty()) throw CorpusError("condition set '" + name + "' has no labels");
  std::set<std::string> seen;
  for (const auto& l : labels) {
    if (l.empty()) throw CorpusError("empty condition label");
    if (l.find_first_of(" \t,") != std::string::npos) {
      throw CorpusError("condition label '" + l + "' contains a separator");
    }
    if (!seen.insert(l).second) throw CorpusError("duplicate condition label '" + l + "'");
  }
}

ConditionSet ConditionSet::stress() {
  return {"stress", {"neutral", "shouted", "slow", "loud", "soft", "fast"}};
}

ConditionSet ConditionSet::emotion() {
  return {"emotion", {"neutral", "angry", "sad", "happy", "disgust", "fear"}};
}

const char* gender_name(Gender g) {
  switch (g) {
    case Gender::kMale:
      return "male";
    case Gender::kFemale:
      return "female";
    case Gender::kUnknown:
      return "unknown";
  }
  return "unknown";
}

Gender parse_gender(std::string_view s) {
  if (s == "male" || s == "m" || s == "M") return Gender::kMale;
  if (s == "female" || s == "f" || s == "F") return Gender::kFemale;
  if (s == "unknown" || s == "-" || s.empty()) return Gender::kUnknown;
  throw CorpusError("unknown gender '" + std::string(s) + "'");
}

std::size_t CorpusManifest::condition_index(const Utterance& u) const {
  const auto idx = condition_set.index_of(u.condition);
  if (!idx) throw CorpusError("unknown condition label '" + u.condition + "'");
  return *idx;
}

void validate_manifest(const CorpusManifest& m) {
  m.condition_set.validate();
  if (m.sample_rate_hz <= 0) throw CorpusError("sample rate must be positive");
  std::set<std::tuple<std::string, int, std::string, int>> keys;
  for (const auto& u : m.utterances) {
    if (!m.condition_set.index_of(u.condition)) {
      throw CorpusError("unknown condition label '" + u.condition + "'");
    }
    if (u.repetition < 1) throw CorpusError("repetition must be >= 1");
    if (u.sentence_id < 1) throw CorpusError("sentence id must be >= 1");
    if (u.speaker_id.empty()) throw CorpusError("empty speaker id");
    if (!keys.emplace(u.speaker_id, u.sentence_id, u.condition, u.repetition).second) {
      throw CorpusError("duplicate utterance key (" + u.speaker_id + ", " +
                        std::to_string(u.sentence_id) + ", " + u.condition + ", " +
                        std::to_string(u.repetition) + ")");
    }
  }
}

CorpusManifest load_manifest(const fs::path& path, const ManifestLoadOptions& opts) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot open manifest " + path.string());
  const fs::path base = fs::absolute(path).parent_path();

  CorpusManifest m;
  std::string line;
  std::size_t lineno = 0;
  bool have_conditions = false;
  bool have_columns = false;

  if (!std::getline(in, line) || strip_cr(line) != kMagic) {
    throw CorpusError(path.string() + ": missing '" + std::string(kMagic) + "' header");
  }
  ++lineno;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_cr(line);
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream hs(line.substr(1));
      std::string key;
      hs >> key;
      if (key == "conditions") {
        std::string labels;
        hs >> m.condition_set.name >> labels;
        m.condition_set.labels = split(labels, ',');
        have_conditions = true;
      } else if (key == "sample_rate") {
        std::string v;
        hs >> v;
        m.sample_rate_hz = parse_int(v, "sample rate", lineno);
      }
      continue;
    }
    if (!have_columns) {
      if (line != kColumns) {
        throw CorpusError("line " + std::to_string(lineno) + ": expected column header");
      }
      have_columns = true;
      continue;
    }
    const auto f = split(line, '\t');
    if (f.size() != 6) {
      throw CorpusError("line " + std::to_string(lineno) + ": expected 6 fields, got " +
                        std::to_string(f.size()));
    }
    Utterance u;
    u.audio_path = fs::path(f[0]).is_absolute() ? fs::path(f[0]) : base / f[0];
    u.speaker_id = f[1];
    u.gender = parse_gender(f[2]);
    u.sentence_id = parse_int(f[3], "sentence id", lineno);
    u.condition = f[4];
    u.repetition = parse_int(f[5], "repetition", lineno);
    if (opts.verify_audio && !fs::exists(u.audio_path)) {
      throw CorpusError("line " + std::to_string(lineno) + ": missing audio file " +
                        u.audio_path.string());
    }
    m.utterances.push_back(std::move(u));
  }
  if (!have_conditions) throw CorpusError(path.string() + ": missing #conditions header");
  validate_manifest(m);
  return m;
}

void save_manifest(const CorpusManifest& m, const fs::path& path) {
  validate_manifest(m);
  const fs::path base = fs::absolute(path).parent_path();
  std::ofstream out(path);
  if (!out) throw CorpusError("cannot write manifest " + path.string());
  out << kMagic << '\n';
  out << "#conditions " << m.condition_set.name << ' ';
  for (std::size_t i = 0; i < m.condition_set.labels.size(); ++i) {
    out << (i ? "," : "") << m.condition_set.labels[i];
  }
  out << "\n#sample_rate " << m.sample_rate_hz << '\n' << kColumns << '\n';
  for (const auto& u : m.utterances) {
    fs::path p = u.audio_path;
    if (p.is_absolute()) {
      const fs::path rel = p.lexically_relative(base);
      if (!rel.empty() && *rel.begin() != "..") p = rel;
    }
    out << p.generic_string() << '\t' << u.speaker_id << '\t' << gender_name(u.gender)
        << '\t' << u.sentence_id << '\t' << u.condition << '\t' << u.repetition << '\n';
  }
  if (!out) throw CorpusError("write failed for " + path.string());
}

void SplitSpec::validate() const {
  if (train_speakers.empty() || test_speakers.empty()) {
    throw CorpusError("split needs at least one train and one test speaker");
  }
  if (train_sentences.empty() || test_sentences.empty()) {
    throw CorpusError("split needs at least one train and one test sentence");
  }
  for (const auto& s : train_speakers) {
    if (test_speakers.count(s)) throw CorpusError("speaker '" + s + "' on both sides");
  }
  for (int s : train_sentences) {
    if (test_sentences.count(s)) {
      throw CorpusError("sentence " + std::to_string(s) + " on both sides");
    }
  }
}

bool SplitSpec::is_train(const Utterance& u) const {
  return train_speakers.count(u.speaker_id) && train_sentences.count(u.sentence_id);
}

bool SplitSpec::is_test(const Utterance& u) const {
  return test_speakers.count(u.speaker_id) && test_sentences.count(u.sentence_id);
}

SplitSpec paper_split(const CorpusManifest& m) {
  std::set<std::string> speakers;
  std::set<int> sentences;
  for (const auto& u : m.utterances) {
    speakers.insert(u.speaker_id);
    sentences.insert(u.sentence_id);
  }
  if (speakers.size() < 2) throw CorpusError("the default split needs at least 2 speakers");
  if (sentences.size() < 2) throw CorpusError("the default split needs at least 2 sentence ids");

  // 20 of 30 speakers, 4 of 8 sentences; clamped so the test side keeps one.
  const std::size_t n_spk = speakers.size();
  const std::size_t n_sen = sentences.size();
  const std::size_t spk_train = std::min((2 * n_spk + 2) / 3, n_spk - 1);
  const std::size_t sen_train = std::min((n_sen + 1) / 2, n_sen - 1);

  SplitSpec s;
  std::size_t i = 0;
  for (const auto& spk : speakers) (i++ < spk_train ? s.train_speakers : s.test_speakers).insert(spk);
  i = 0;
  for (int sen : sentences) (i++ < sen_train ? s.train_sentences : s.test_sentences).insert(sen);
  s.validate();
  return s;
}

std::vector<std::size_t> train_indices(const CorpusManifest& m, const SplitSpec& s) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < m.utterances.size(); ++i) {
    if (s.is_train(m.utterances[i])) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> test_indices(const CorpusManifest& m, const SplitSpec& s) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < m.utterances.size(); ++i) {
    if (s.is_test(m.utterances[i])) out.push_back(i);
  }
  return out;
}

}  // namespace talkcond
