#pragma once

#include <span>
#include <string>

#include "talkcond/classify.hpp"
#include "talkcond/protocol.hpp"

namespace talkcond {

// Percentages print with at most one decimal ("92", "50.5").
std::string format_percent(double pct);

// Gender rows then the average row, one column per condition.
std::string format_performance_table(const PerformanceReport& report);
// Rows are models (predicted), columns the true condition.
std::string format_confusion_table(const ConfusionMatrix& confusion);

// Line-delimited JSON: one "performance" record per row, one "summary"
// record and one "confusion" record.
std::string report_jsonl(const PerformanceReport& report, const ConfusionMatrix& confusion);

std::string format_sweep_table(std::span<const SweepRow> rows, const std::vector<std::string>& labels);
// "alpha<TAB>average" with a header line.
std::string sweep_tsv(std::span<const SweepRow> rows, bool exclude_neutral);
std::string sweep_jsonl(std::span<const SweepRow> rows);

}  // namespace talkcond
