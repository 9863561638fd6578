#pragma once

// Shared EM plumbing for the HMM trainers.

#include <algorithm>
#include <numeric>
#include <span>
#include <vector>

#include "talkcond/hmm.hpp"
#include "talkcond/matrix.hpp"
#include "talkcond/parallel.hpp"

namespace talkcond::detail {

// Accumulates per-chunk statistics in parallel, then folds them in chunk
// order.
template <typename Stats, typename MakeStats, typename Accumulate>
Stats chunked_estep(std::size_t n_items, std::size_t workers, MakeStats make,
                    Accumulate accumulate) {
  const std::size_t n_chunks = (n_items + kStatsChunk - 1) / kStatsChunk;
  std::vector<Stats> partial;
  partial.reserve(n_chunks);
  for (std::size_t c = 0; c < n_chunks; ++c) partial.push_back(make());
  parallel_for(n_chunks, workers, [&](std::size_t c) {
    const std::size_t end = std::min(n_items, (c + 1) * kStatsChunk);
    for (std::size_t k = c * kStatsChunk; k < end; ++k) accumulate(k, partial[c]);
  });
  Stats total = make();
  for (const auto& p : partial) total.add(p);
  return total;
}

// Normalizes rows; rows with no mass keep their previous values.
inline void normalize_rows_into(const Matrix& counts, Matrix& target) {
  for (std::size_t r = 0; r < counts.rows(); ++r) {
    const auto row = counts.row(r);
    const double s = std::accumulate(row.begin(), row.end(), 0.0);
    if (!(s > 0.0)) continue;
    for (std::size_t c = 0; c < counts.cols(); ++c) target(r, c) = row[c] / s;
  }
}

inline void normalize_into(std::span<const double> counts, std::span<double> target) {
  const double s = std::accumulate(counts.begin(), counts.end(), 0.0);
  if (!(s > 0.0)) return;
  for (std::size_t i = 0; i < counts.size(); ++i) target[i] = counts[i] / s;
}

inline void add_into(std::span<double> a, std::span<const double> b) {
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

// True when the log-likelihood trace should stop at index `iter`.
inline bool em_should_stop(TrainTrace& trace, int iter, int max_iters, double tol) {
  const auto& ll = trace.log_likelihood;
  if (iter > 0 && ll[iter] - ll[iter - 1] < tol) {
    trace.converged = true;
    return true;
  }
  return iter == max_iters;
}

}  // namespace talkcond::detail
