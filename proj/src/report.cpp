#include "talkcond/report.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "json.hpp"

namespace talkcond {

namespace {

std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

std::string capitalized(std::string s) {
  if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') s[0] = static_cast<char>(s[0] - 'a' + 'A');
  return s;
}

std::size_t column_width(const std::vector<std::string>& labels) {
  std::size_t w = 8;
  for (const auto& l : labels) w = std::max(w, l.size() + 2);
  return w;
}

double json_number(double pct) { return round1(pct); }

std::string alpha_text(double a) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%.2f", a);
  return buf;
}

}  // namespace

std::string format_percent(double pct) {
  const double r = round1(pct);
  char buf[32];
  if (r == std::floor(r)) {
    std::snprintf(buf, sizeof buf, "%.0f", r);
  } else {
    std::snprintf(buf, sizeof buf, "%.1f", r);
  }
  return buf;
}

std::string format_performance_table(const PerformanceReport& report) {
  std::ostringstream os;
  const std::size_t w = column_width(report.labels);
  os << "Identification performance (%), model " << model_kind_name(report.kind);
  if (report.alpha) os << " (alpha = " << alpha_text(*report.alpha) << ")";
  os << "\n";
  os << pad("Gender", 10);
  for (const auto& l : report.labels) os << pad(capitalized(l), w);
  os << "\n";
  for (const auto& row : report.rows) {
    os << pad(capitalized(row.group), 10);
    for (double p : row.per_condition) os << pad(format_percent(p), w);
    os << "\n";
  }
  os << "Overall average: " << format_percent(report.average) << "\n";
  return os.str();
}

std::string format_confusion_table(const ConfusionMatrix& confusion) {
  std::ostringstream os;
  const std::size_t w = column_width(confusion.labels());
  os << "Confusion (%): rows are models, columns the true condition\n";
  os << pad("Model", w);
  for (const auto& l : confusion.labels()) os << pad(capitalized(l), w);
  os << "\n";
  for (std::size_t p = 0; p < confusion.size(); ++p) {
    os << pad(capitalized(confusion.labels()[p]), w);
    for (std::size_t t = 0; t < confusion.size(); ++t) os << pad(format_percent(confusion.percent(p, t)), w);
    os << "\n";
  }
  return os.str();
}

std::string report_jsonl(const PerformanceReport& report, const ConfusionMatrix& confusion) {
  using nlohmann::json;
  std::ostringstream os;
  const auto alpha = report.alpha ? json(*report.alpha) : json(nullptr);
  for (const auto& row : report.rows) {
    json j{{"record", "performance"}, {"model", model_kind_name(report.kind)}, {"alpha", alpha},
           {"group", row.group},      {"utterances", row.n_utterances}};
    json per = json::object();
    for (std::size_t v = 0; v < report.labels.size(); ++v) {
      per[report.labels[v]] = json_number(row.per_condition[v]);
    }
    j["identification"] = per;
    j["average"] = average_performance(row.per_condition);
    os << j.dump() << "\n";
  }
  os << json{{"record", "summary"}, {"model", model_kind_name(report.kind)}, {"alpha", alpha},
             {"average", report.average}}
            .dump()
     << "\n";
  json counts = json::array(), pct = json::array();
  for (std::size_t p = 0; p < confusion.size(); ++p) {
    json crow = json::array(), prow = json::array();
    for (std::size_t t = 0; t < confusion.size(); ++t) {
      crow.push_back(confusion.count(p, t));
      prow.push_back(json_number(confusion.percent(p, t)));
    }
    counts.push_back(crow);
    pct.push_back(prow);
  }
  os << json{{"record", "confusion"}, {"model", model_kind_name(report.kind)}, {"alpha", alpha},
             {"labels", confusion.labels()}, {"counts", counts}, {"percent", pct}}
            .dump()
     << "\n";
  return os.str();
}

std::string format_sweep_table(std::span<const SweepRow> rows, const std::vector<std::string>& labels) {
  std::ostringstream os;
  const std::size_t w = column_width(labels);
  os << "Identification performance (%) versus alpha\n";
  os << pad("Alpha", 8);
  for (const auto& l : labels) os << pad(capitalized(l), w);
  os << pad("Average", 10) << "Average w/o neutral\n";
  for (const auto& row : rows) {
    char a[16];
    std::snprintf(a, sizeof a, "%.2f", row.alpha);
    os << pad(a, 8);
    for (double p : row.evaluation.report.average_row().per_condition) os << pad(format_percent(p), w);
    os << pad(format_percent(row.average_all), 10) << format_percent(row.average_excluding_neutral)
       << "\n";
  }
  return os.str();
}

std::string sweep_tsv(std::span<const SweepRow> rows, bool exclude_neutral) {
  std::ostringstream os;
  os << "alpha\taverage\n";
  for (const auto& row : rows) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f\t%.1f\n", row.alpha,
                  exclude_neutral ? row.average_excluding_neutral : row.average_all);
    os << buf;
  }
  return os.str();
}

std::string sweep_jsonl(std::span<const SweepRow> rows) {
  using nlohmann::json;
  std::ostringstream os;
  for (const auto& row : rows) {
    const auto& rep = row.evaluation.report;
    json per = json::object();
    for (std::size_t v = 0; v < rep.labels.size(); ++v) {
      per[rep.labels[v]] = json_number(rep.average_row().per_condition[v]);
    }
    os << json{{"record", "sweep"},
               {"alpha", row.alpha},
               {"identification", per},
               {"average", row.average_all},
               {"average_excluding_neutral", row.average_excluding_neutral}}
              .dump()
       << "\n";
  }
  return os.str();
}

}  // namespace talkcond
