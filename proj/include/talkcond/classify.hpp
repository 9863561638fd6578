#pragma once

#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "talkcond/chmm2.hpp"
#include "talkcond/corpus.hpp"
#include "talkcond/features.hpp"
#include "talkcond/hmm.hpp"
#include "talkcond/sphmm.hpp"

namespace talkcond {

enum class ModelKind { kHmm, kChmm2, kSphmm };

const char* model_kind_name(ModelKind k);
ModelKind parse_model_kind(std::string_view s);

// One trained model per condition label, in label order.
struct ModelBank {
  ConditionSet condition_set;
  MfccConfig mfcc;
  ProsodyConfig prosody;
  std::variant<std::vector<Hmm1Model>, std::vector<Chmm2Model>, std::vector<SphmmModel>> models;

  ModelKind kind() const noexcept { return static_cast<ModelKind>(models.index()); }
  std::size_t size() const;
  std::size_t acoustic_dim() const;
  void validate() const;

  friend bool operator==(const ModelBank&, const ModelBank&) = default;
};

struct UtteranceFeatures {
  FeatureSequence acoustic;
  FeatureSequence prosodic;  // empty unless the bank needs it
};

// Log score of every model in the bank; sphmm banks use each model's alpha.
std::vector<double> score_bank(const ModelBank& bank, const UtteranceFeatures& f);

// Index of the largest score; the lowest index wins ties.
std::size_t argmax_score(std::span<const double> scores);

std::size_t identify(const ModelBank& bank, const UtteranceFeatures& f);

// counts(predicted, true); columns are the true condition.
class ConfusionMatrix {
 public:
  ConfusionMatrix() = default;
  explicit ConfusionMatrix(std::vector<std::string> labels);

  const std::vector<std::string>& labels() const noexcept { return labels_; }
  std::size_t size() const noexcept { return labels_.size(); }

  void add(std::size_t predicted, std::size_t truth, long n = 1);
  void merge(const ConfusionMatrix& other);
  long count(std::size_t predicted, std::size_t truth) const;
  long column_total(std::size_t truth) const;
  long total() const;

  // Share of true-`truth` utterances assigned to `predicted`, in percent
  // (0 for an empty column).
  double percent(std::size_t predicted, std::size_t truth) const;
  double diagonal_percent(std::size_t v) const { return percent(v, v); }

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  std::vector<std::string> labels_;
  std::vector<long> counts_;
};

// Mean of the values rounded to one decimal.
double average_performance(std::span<const double> per_condition);
// 100 * (new - base) / base, one decimal.
double relative_improvement(double new_pct, double base_pct);
double round1(double x);

struct PerformanceRow {
  std::string group;  // gender name or "average"
  std::vector<double> per_condition;
  long n_utterances = 0;
};

struct PerformanceReport {
  ModelKind kind = ModelKind::kHmm;
  std::optional<double> alpha;
  std::vector<std::string> labels;
  std::vector<PerformanceRow> rows;  // gender rows first, "average" last
  double average = 0.0;             // average_performance of the "average" row

  const PerformanceRow& average_row() const { return rows.back(); }
};

struct Decision {
  std::size_t utterance = 0;  // index into the manifest
  std::size_t truth = 0;
  std::size_t predicted = 0;
  Gender gender = Gender::kUnknown;
};

// Confusion matrix over all decisions plus per-gender rows for the genders
// present.
PerformanceReport make_report(ModelKind kind, std::optional<double> alpha,
                              const std::vector<std::string>& labels,
                              std::span<const Decision> decisions, ConfusionMatrix* confusion);

}  // namespace talkcond
