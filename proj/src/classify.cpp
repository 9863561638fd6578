#include "talkcond/classify.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "talkcond/error.hpp"

namespace talkcond {

const char* model_kind_name(ModelKind k) {
  switch (k) {
    case ModelKind::kHmm: return "hmm";
    case ModelKind::kChmm2: return "chmm2";
    case ModelKind::kSphmm: return "sphmm";
  }
  return "?";
}

ModelKind parse_model_kind(std::string_view s) {
  if (s == "hmm") return ModelKind::kHmm;
  if (s == "chmm2") return ModelKind::kChmm2;
  if (s == "sphmm") return ModelKind::kSphmm;
  throw ModelError("unknown model kind '" + std::string(s) + "' (expected hmm, chmm2 or sphmm)");
}

std::size_t ModelBank::size() const {
  return std::visit([](const auto& v) { return v.size(); }, models);
}

namespace {

std::size_t model_dim(const Hmm1Model& m) { return m.dim(); }
std::size_t model_dim(const Chmm2Model& m) { return m.dim(); }
std::size_t model_dim(const SphmmModel& m) { return m.acoustic.dim(); }

}  // namespace

std::size_t ModelBank::acoustic_dim() const {
  return std::visit([](const auto& v) { return v.empty() ? std::size_t{0} : model_dim(v.front()); },
                    models);
}

void ModelBank::validate() const {
  condition_set.validate();
  if (size() != condition_set.size()) {
    throw ModelError("bank has " + std::to_string(size()) + " models for " +
                     std::to_string(condition_set.size()) + " conditions");
  }
  const std::size_t dim = acoustic_dim();
  std::visit(
      [dim](const auto& v) {
        for (const auto& m : v) {
          m.validate();
          if (model_dim(m) != dim) throw ModelError("bank models disagree on feature dimension");
        }
      },
      models);
  if (static_cast<std::size_t>(mfcc.n_cepstra) * 2 != dim) {
    throw ModelError("bank feature configuration does not match model dimension");
  }
}

std::vector<double> score_bank(const ModelBank& bank, const UtteranceFeatures& f) {
  if (f.acoustic.dim() != bank.acoustic_dim()) {
    throw ModelError("feature dimension " + std::to_string(f.acoustic.dim()) +
                     " does not match bank dimension " + std::to_string(bank.acoustic_dim()));
  }
  std::vector<double> scores;
  scores.reserve(bank.size());
  std::visit(
      [&](const auto& v) {
        for (const auto& m : v) {
          using M = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<M, SphmmModel>) {
            scores.push_back(fused_log_likelihood(m, f.acoustic, f.prosodic));
          } else {
            scores.push_back(log_likelihood(m, f.acoustic));
          }
        }
      },
      bank.models);
  return scores;
}

std::size_t argmax_score(std::span<const double> scores) {
  if (scores.empty()) throw ModelError("no scores to compare");
  std::size_t best = 0;
  for (std::size_t v = 1; v < scores.size(); ++v) {
    if (scores[v] > scores[best]) best = v;
  }
  return best;
}

std::size_t identify(const ModelBank& bank, const UtteranceFeatures& f) {
  return argmax_score(score_bank(bank, f));
}

ConfusionMatrix::ConfusionMatrix(std::vector<std::string> labels)
    : labels_(std::move(labels)), counts_(labels_.size() * labels_.size(), 0) {}

void ConfusionMatrix::add(std::size_t predicted, std::size_t truth, long n) {
  if (predicted >= size() || truth >= size()) throw ModelError("confusion index out of range");
  counts_[predicted * size() + truth] += n;
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.labels_ != labels_) throw ModelError("cannot merge confusion matrices with different labels");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
}

long ConfusionMatrix::count(std::size_t predicted, std::size_t truth) const {
  return counts_.at(predicted * size() + truth);
}

long ConfusionMatrix::column_total(std::size_t truth) const {
  long s = 0;
  for (std::size_t p = 0; p < size(); ++p) s += count(p, truth);
  return s;
}

long ConfusionMatrix::total() const { return std::accumulate(counts_.begin(), counts_.end(), 0L); }

double ConfusionMatrix::percent(std::size_t predicted, std::size_t truth) const {
  const long n = column_total(truth);
  return n == 0 ? 0.0 : 100.0 * static_cast<double>(count(predicted, truth)) / n;
}

double round1(double x) { return std::round(x * 10.0) / 10.0; }

double average_performance(std::span<const double> per_condition) {
  if (per_condition.empty()) throw ModelError("average of no conditions");
  const double sum = std::accumulate(per_condition.begin(), per_condition.end(), 0.0);
  return round1(sum / per_condition.size());
}

double relative_improvement(double new_pct, double base_pct) {
  if (!(base_pct > 0.0)) throw ModelError("relative improvement needs a positive base");
  return round1(100.0 * (new_pct - base_pct) / base_pct);
}

PerformanceReport make_report(ModelKind kind, std::optional<double> alpha,
                              const std::vector<std::string>& labels,
                              std::span<const Decision> decisions, ConfusionMatrix* confusion) {
  PerformanceReport report;
  report.kind = kind;
  report.alpha = alpha;
  report.labels = labels;
  const auto row_for = [&](std::optional<Gender> g, ConfusionMatrix* out) {
    ConfusionMatrix cm(labels);
    PerformanceRow row;
    row.group = g ? gender_name(*g) : "average";
    for (const auto& d : decisions) {
      if (g && d.gender != *g) continue;
      cm.add(d.predicted, d.truth);
      ++row.n_utterances;
    }
    for (std::size_t v = 0; v < labels.size(); ++v) row.per_condition.push_back(cm.diagonal_percent(v));
    if (out) *out = cm;
    return row;
  };
  for (Gender g : {Gender::kMale, Gender::kFemale, Gender::kUnknown}) {
    const bool present =
        std::any_of(decisions.begin(), decisions.end(), [g](const Decision& d) { return d.gender == g; });
    if (present) report.rows.push_back(row_for(g, nullptr));
  }
  report.rows.push_back(row_for(std::nullopt, confusion));
  report.average = average_performance(report.rows.back().per_condition);
  return report;
}

}  // namespace talkcond
