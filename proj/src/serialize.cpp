#include "talkcond/serialize.hpp"

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "talkcond/error.hpp"

namespace talkcond {

namespace {

class Writer {
 public:
  void word(std::string_view w) {
    sep();
    out_ += w;
  }
  void integer(long long v) { word(std::to_string(v)); }
  void real(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%a", v);
    word(buf);
  }
  void reals(std::span<const double> v, std::size_t per_line) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i % per_line == 0) newline();
      real(v[i]);
    }
  }
  void newline() {
    if (!out_.empty() && out_.back() != '\n') out_ += '\n';
  }
  std::string take() {
    newline();
    return std::move(out_);
  }

 private:
  void sep() {
    if (!out_.empty() && out_.back() != '\n') out_ += ' ';
  }
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view text) : text_(text) {}

  std::string_view next() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    if (pos_ == text_.size()) throw FormatError("unexpected end of file");
    const std::size_t start = pos_;
    while (pos_ < text_.size() && !std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    ++count_;
    return text_.substr(start, pos_ - start);
  }
  std::string_view peek() {
    const auto save_pos = pos_;
    const auto save_count = count_;
    const auto t = next();
    pos_ = save_pos;
    count_ = save_count;
    return t;
  }
  void expect(std::string_view w) {
    const auto t = next();
    if (t != w) fail("expected '" + std::string(w) + "', found '" + std::string(t) + "'");
  }
  long long integer(long long lo, long long hi) {
    const std::string t(next());
    char* end = nullptr;
    errno = 0;
    const long long v = std::strtoll(t.c_str(), &end, 10);
    if (t.empty() || *end != '\0' || errno != 0 || v < lo || v > hi) fail("bad integer '" + t + "'");
    return v;
  }
  double real() {
    const std::string t(next());
    char* end = nullptr;
    const double v = std::strtod(t.c_str(), &end);
    if (t.empty() || *end != '\0' || !std::isfinite(v)) fail("bad real '" + t + "'");
    return v;
  }
  void reals(std::span<double> out) {
    for (double& v : out) v = real();
  }
  void at_end() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    if (pos_ != text_.size()) fail("trailing content");
  }
  [[noreturn]] void fail(const std::string& what) const {
    throw FormatError("token " + std::to_string(count_) + ": " + what);
  }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t count_ = 0;
};

constexpr long long kMaxDim = 1 << 20;

void write_gmms(Writer& w, const std::vector<GmmEmission>& emissions) {
  for (std::size_t i = 0; i < emissions.size(); ++i) {
    const auto& e = emissions[i];
    w.newline();
    w.word("state");
    w.integer(static_cast<long long>(i));
    w.word("mixtures");
    w.integer(static_cast<long long>(e.n_mix()));
    w.newline();
    w.word("weights");
    w.reals(e.weights(), e.n_mix());
    w.newline();
    w.word("means");
    w.reals(e.means().flat(), e.dim());
    w.newline();
    w.word("variances");
    w.reals(e.variances().flat(), e.dim());
  }
}

std::vector<GmmEmission> read_gmms(Reader& r, std::size_t n, std::size_t dim) {
  std::vector<GmmEmission> out;
  for (std::size_t i = 0; i < n; ++i) {
    r.expect("state");
    if (static_cast<std::size_t>(r.integer(0, kMaxDim)) != i) r.fail("states out of order");
    r.expect("mixtures");
    const auto m = static_cast<std::size_t>(r.integer(1, kMaxDim));
    std::vector<double> weights(m);
    Matrix means(m, dim), vars(m, dim);
    r.expect("weights");
    r.reals(weights);
    r.expect("means");
    r.reals(means.flat());
    r.expect("variances");
    r.reals(vars.flat());
    out.emplace_back(std::move(weights), std::move(means), std::move(vars));
  }
  return out;
}

void write_hmm(Writer& w, const Hmm1Model& m) {
  m.validate();
  w.word("model");
  w.word("hmm1");
  w.newline();
  w.word("states");
  w.integer(static_cast<long long>(m.n_states()));
  w.word("dim");
  w.integer(static_cast<long long>(m.dim()));
  w.newline();
  w.word("initial");
  w.reals(m.initial, m.n_states());
  w.newline();
  w.word("trans");
  w.reals(m.trans.flat(), m.n_states());
  write_gmms(w, m.emissions);
  w.newline();
  w.word("end");
  w.newline();
}

Hmm1Model read_hmm(Reader& r) {
  r.expect("model");
  r.expect("hmm1");
  r.expect("states");
  const auto n = static_cast<std::size_t>(r.integer(1, 4096));
  r.expect("dim");
  const auto d = static_cast<std::size_t>(r.integer(1, kMaxDim));
  Hmm1Model m;
  m.initial.resize(n);
  m.trans = Matrix(n, n);
  r.expect("initial");
  r.reals(m.initial);
  r.expect("trans");
  r.reals(m.trans.flat());
  m.emissions = read_gmms(r, n, d);
  r.expect("end");
  m.validate();
  return m;
}

void write_chmm2(Writer& w, const Chmm2Model& m) {
  m.validate();
  const std::size_t n = m.n_states();
  w.word("model");
  w.word("chmm2");
  w.newline();
  w.word("states");
  w.integer(static_cast<long long>(n));
  w.word("dim");
  w.integer(static_cast<long long>(m.dim()));
  w.newline();
  w.word("initial_pair");
  w.reals(m.initial_pair.flat(), n);
  w.newline();
  w.word("trans2");
  w.reals(m.trans2.flat(), n);
  write_gmms(w, m.emissions);
  w.newline();
  w.word("end");
  w.newline();
}

Chmm2Model read_chmm2(Reader& r) {
  r.expect("model");
  r.expect("chmm2");
  r.expect("states");
  const auto n = static_cast<std::size_t>(r.integer(1, 256));
  r.expect("dim");
  const auto d = static_cast<std::size_t>(r.integer(1, kMaxDim));
  Chmm2Model m;
  m.initial_pair = Matrix(n, n);
  m.trans2 = Matrix(n * n, n);
  r.expect("initial_pair");
  r.reals(m.initial_pair.flat());
  r.expect("trans2");
  r.reals(m.trans2.flat());
  m.emissions = read_gmms(r, n, d);
  r.expect("end");
  m.validate();
  return m;
}

void write_sphmm(Writer& w, const SphmmModel& m) {
  m.validate();
  w.word("model");
  w.word("sphmm");
  w.newline();
  w.word("alpha");
  w.real(m.alpha);
  w.word("grouping");
  w.integer(static_cast<long long>(m.grouping));
  w.newline();
  w.word("acoustic");
  w.newline();
  write_hmm(w, m.acoustic);
  w.word("prosodic");
  w.newline();
  write_hmm(w, m.prosodic);
  w.word("end");
  w.newline();
}

SphmmModel read_sphmm(Reader& r) {
  r.expect("model");
  r.expect("sphmm");
  SphmmModel m;
  r.expect("alpha");
  m.alpha = r.real();
  r.expect("grouping");
  m.grouping = static_cast<std::size_t>(r.integer(1, 4096));
  r.expect("acoustic");
  m.acoustic = read_hmm(r);
  r.expect("prosodic");
  m.prosodic = read_hmm(r);
  r.expect("end");
  m.validate();
  return m;
}

template <typename Model, typename Read>
Model parse_model_file(std::string_view text, Read read) {
  Reader r(text);
  r.expect("talkcond-model");
  r.expect("v1");
  Model m = read(r);
  r.at_end();
  return m;
}

template <typename Model, typename WriteFn>
std::string model_file(const Model& m, WriteFn write) {
  Writer w;
  w.word("talkcond-model");
  w.word("v1");
  w.newline();
  write(w, m);
  return w.take();
}

void check_token(const std::string& s, const char* what) {
  if (s.empty() || std::any_of(s.begin(), s.end(), [](char c) {
        return std::isspace(static_cast<unsigned char>(c));
      })) {
    throw FormatError(std::string(what) + " '" + s + "' cannot be stored (empty or has spaces)");
  }
}

}  // namespace

std::string model_to_text(const Hmm1Model& m) { return model_file(m, write_hmm); }
std::string model_to_text(const Chmm2Model& m) { return model_file(m, write_chmm2); }
std::string model_to_text(const SphmmModel& m) { return model_file(m, write_sphmm); }

Hmm1Model hmm_from_text(std::string_view t) { return parse_model_file<Hmm1Model>(t, read_hmm); }
Chmm2Model chmm2_from_text(std::string_view t) { return parse_model_file<Chmm2Model>(t, read_chmm2); }
SphmmModel sphmm_from_text(std::string_view t) { return parse_model_file<SphmmModel>(t, read_sphmm); }

std::string bank_to_text(const ModelBank& bank) {
  bank.validate();
  check_token(bank.condition_set.name, "condition set name");
  Writer w;
  w.word("talkcond-bank");
  w.word("v1");
  w.newline();
  w.word("kind");
  w.word(model_kind_name(bank.kind()));
  w.newline();
  w.word("condition_set");
  w.word(bank.condition_set.name);
  w.newline();
  w.word("labels");
  w.integer(static_cast<long long>(bank.condition_set.size()));
  for (const auto& l : bank.condition_set.labels) {
    check_token(l, "label");
    w.word(l);
  }
  const auto& f = bank.mfcc;
  w.newline();
  w.word("mfcc");
  w.word("window_s"), w.real(f.window_s);
  w.word("hop_s"), w.real(f.hop_s);
  w.word("n_mel_filters"), w.integer(f.n_mel_filters);
  w.word("n_cepstra"), w.integer(f.n_cepstra);
  w.word("delta_window"), w.integer(f.delta_window);
  w.word("pre_emphasis"), w.real(f.pre_emphasis);
  w.word("log_floor"), w.real(f.log_floor);
  w.word("low_freq_hz"), w.real(f.low_freq_hz);
  w.word("high_freq_hz"), w.real(f.high_freq_hz);
  const auto& p = bank.prosody;
  w.newline();
  w.word("prosody");
  w.word("block_frames"), w.integer(p.block_frames);
  w.word("f0_min_hz"), w.real(p.f0_min_hz);
  w.word("f0_max_hz"), w.real(p.f0_max_hz);
  w.word("voicing_threshold"), w.real(p.voicing_threshold);
  w.word("analysis_window_s"), w.real(p.analysis_window_s);
  w.newline();
  std::visit(
      [&](const auto& models) {
        for (std::size_t v = 0; v < models.size(); ++v) {
          w.word("condition");
          w.word(bank.condition_set.labels[v]);
          w.newline();
          using M = std::decay_t<decltype(models[v])>;
          if constexpr (std::is_same_v<M, Hmm1Model>) write_hmm(w, models[v]);
          if constexpr (std::is_same_v<M, Chmm2Model>) write_chmm2(w, models[v]);
          if constexpr (std::is_same_v<M, SphmmModel>) write_sphmm(w, models[v]);
        }
      },
      bank.models);
  w.word("end");
  return w.take();
}

ModelBank bank_from_text(std::string_view text) {
  Reader r(text);
  r.expect("talkcond-bank");
  r.expect("v1");
  r.expect("kind");
  ModelKind kind;
  try {
    kind = parse_model_kind(r.next());
  } catch (const ModelError& e) {
    r.fail(e.what());
  }
  ModelBank bank;
  r.expect("condition_set");
  bank.condition_set.name = std::string(r.next());
  r.expect("labels");
  const auto k = static_cast<std::size_t>(r.integer(1, 4096));
  for (std::size_t v = 0; v < k; ++v) bank.condition_set.labels.emplace_back(r.next());
  auto& f = bank.mfcc;
  r.expect("mfcc");
  r.expect("window_s"), f.window_s = r.real();
  r.expect("hop_s"), f.hop_s = r.real();
  r.expect("n_mel_filters"), f.n_mel_filters = static_cast<int>(r.integer(1, 4096));
  r.expect("n_cepstra"), f.n_cepstra = static_cast<int>(r.integer(1, 4096));
  r.expect("delta_window"), f.delta_window = static_cast<int>(r.integer(1, 4096));
  r.expect("pre_emphasis"), f.pre_emphasis = r.real();
  r.expect("log_floor"), f.log_floor = r.real();
  r.expect("low_freq_hz"), f.low_freq_hz = r.real();
  r.expect("high_freq_hz"), f.high_freq_hz = r.real();
  auto& p = bank.prosody;
  r.expect("prosody");
  r.expect("block_frames"), p.block_frames = static_cast<int>(r.integer(1, 1 << 20));
  r.expect("f0_min_hz"), p.f0_min_hz = r.real();
  r.expect("f0_max_hz"), p.f0_max_hz = r.real();
  r.expect("voicing_threshold"), p.voicing_threshold = r.real();
  r.expect("analysis_window_s"), p.analysis_window_s = r.real();

  const auto read_all = [&](auto read) {
    std::vector<decltype(read(r))> models;
    for (std::size_t v = 0; v < k; ++v) {
      r.expect("condition");
      if (r.next() != bank.condition_set.labels[v]) r.fail("conditions out of label order");
      models.push_back(read(r));
    }
    return models;
  };
  switch (kind) {
    case ModelKind::kHmm: bank.models = read_all(read_hmm); break;
    case ModelKind::kChmm2: bank.models = read_all(read_chmm2); break;
    case ModelKind::kSphmm: bank.models = read_all(read_sphmm); break;
  }
  r.expect("end");
  r.at_end();
  try {
    bank.mfcc.validate();
    bank.validate();
  } catch (const Error& e) {
    throw FormatError(std::string("bank is inconsistent: ") + e.what());
  }
  return bank;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open " + tmp.string() + " for writing");
    out << text;
    out.flush();
    if (!out) throw FormatError("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw FormatError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void save_bank(const std::filesystem::path& path, const ModelBank& bank) {
  write_text_file(path, bank_to_text(bank));
}

ModelBank load_bank(const std::filesystem::path& path) {
  try {
    return bank_from_text(read_text_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace talkcond
