#include "talkcond/hmm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "talkcond/error.hpp"
#include "talkcond/kernels.hpp"
#include "talkcond/logmath.hpp"
#include "talkcond/parallel.hpp"
#include "estep.hpp"

namespace talkcond {

namespace detail {

void check_stochastic(std::span<const double> v, const char* what) {
  double s = 0.0;
  for (double p : v) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw ModelError(std::string(what) + ": invalid probability");
    s += p;
  }
  if (std::abs(s - 1.0) > 1e-9) throw ModelError(std::string(what) + " does not sum to 1");
}

void check_rows_stochastic(const Matrix& m, const char* what, bool allow_zero_rows) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row(r);
    if (allow_zero_rows && std::all_of(row.begin(), row.end(), [](double p) { return p == 0.0; })) {
      continue;
    }
    check_stochastic(row, what);
  }
}

std::vector<double> log_vector(std::span<const double> v) {
  std::vector<double> out(v.size());
  std::transform(v.begin(), v.end(), out.begin(), safe_log);
  return out;
}

Matrix log_matrix(const Matrix& m) {
  Matrix out(m.rows(), m.cols());
  std::transform(m.flat().begin(), m.flat().end(), out.flat().begin(), safe_log);
  return out;
}

}  // namespace detail

namespace {

void check_data(std::span<const FeatureSequence> data, std::size_t dim) {
  if (data.empty()) throw TrainingError("no training sequences");
  for (const auto& s : data) {
    if (s.size() == 0) throw TrainingError("empty training sequence");
    if (dim != 0 && s.dim() != dim) {
      throw TrainingError("sequence dimension " + std::to_string(s.dim()) +
                          " does not match model dimension " + std::to_string(dim));
    }
  }
}

// Sums in the forward recursion skip -inf terms without calling exp.
double log_sum_exp_pairs(std::span<const double> a, const Matrix& log_trans, std::size_t j,
                         std::vector<double>& scratch) {
  scratch.clear();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double lt = log_trans(i, j);
    if (lt != kLogZero && a[i] != kLogZero) scratch.push_back(a[i] + lt);
  }
  return log_sum_exp(scratch);
}

struct Hmm1Stats {
  double log_likelihood = 0.0;
  std::vector<double> initial;
  Matrix trans;
  std::vector<GmmStats> gmm;

  explicit Hmm1Stats(const Hmm1Model& m)
      : initial(m.n_states(), 0.0), trans(m.n_states(), m.n_states()) {
    for (const auto& e : m.emissions) gmm.emplace_back(e.n_mix(), e.dim());
  }

  void add(const Hmm1Stats& o) {
    log_likelihood += o.log_likelihood;
    for (std::size_t i = 0; i < initial.size(); ++i) initial[i] += o.initial[i];
    detail::add_into(trans.flat(), o.trans.flat());
    for (std::size_t i = 0; i < gmm.size(); ++i) gmm[i].add(o.gmm[i]);
  }
};

void accumulate_transitions(const Lattice1& fb, const Matrix& log_trans, const Matrix& log_emit,
                            std::vector<double>& initial, Matrix& trans) {
  const std::size_t T = log_emit.rows(), N = log_emit.cols();
  const double ll = fb.log_likelihood;
  for (std::size_t i = 0; i < N; ++i) {
    initial[i] += std::exp(fb.log_alpha(0, i) + fb.log_beta(0, i) - ll);
  }
  for (std::size_t t = 0; t + 1 < T; ++t) {
    for (std::size_t i = 0; i < N; ++i) {
      const double a = fb.log_alpha(t, i);
      if (a == kLogZero) continue;
      for (std::size_t j = 0; j < N; ++j) {
        const double lt = log_trans(i, j);
        if (lt == kLogZero) continue;
        trans(i, j) += std::exp(a + lt + log_emit(t + 1, j) + fb.log_beta(t + 1, j) - ll);
      }
    }
  }
}

void accumulate_sequence(const Hmm1Model& model, std::span<const double> log_initial,
                         const Matrix& log_trans, const FeatureSequence& seq, Hmm1Stats& stats) {
  const std::size_t T = seq.size(), N = model.n_states();
  const std::size_t M_max = [&] {
    std::size_t m = 0;
    for (const auto& e : model.emissions) m = std::max(m, e.n_mix());
    return m;
  }();
  std::vector<double> comp(T * N * M_max, kLogZero);
  Matrix log_emit(T, N);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t i = 0; i < N; ++i) {
      const auto& e = model.emissions[i];
      std::span<double> c(comp.data() + (t * N + i) * M_max, e.n_mix());
      e.component_log_densities(seq.frame(t), c);
      log_emit(t, i) = log_sum_exp(c);
    }
  }
  const Lattice1 fb = forward_backward(log_initial, log_trans, log_emit);
  if (!std::isfinite(fb.log_likelihood)) {
    throw TrainingError("training sequence has zero probability under the model");
  }
  stats.log_likelihood += fb.log_likelihood;
  accumulate_transitions(fb, log_trans, log_emit, stats.initial, stats.trans);

  for (std::size_t t = 0; t < T; ++t) {
    const auto x = seq.frame(t);
    for (std::size_t i = 0; i < N; ++i) {
      const double g = fb.log_alpha(t, i) + fb.log_beta(t, i) - fb.log_likelihood;
      if (g == kLogZero) continue;
      const auto& e = model.emissions[i];
      GmmStats& gs = stats.gmm[i];
      const double* c = comp.data() + (t * N + i) * M_max;
      for (std::size_t m = 0; m < e.n_mix(); ++m) {
        const double r = std::exp(g + c[m] - log_emit(t, i));
        if (r == 0.0) continue;
        gs.occ[m] += r;
        kernels::accumulate_moments(r, x, e.means().row(m), gs.s1.row(m), gs.s2.row(m));
      }
    }
  }
}

}  // namespace

std::vector<double> variance_floor_for(std::span<const FeatureSequence> data,
                                       const TrainOptions& opts) {
  if (!opts.variance_floor.empty()) return opts.variance_floor;
  if (data.empty()) throw TrainingError("no data for variance floor");
  const std::size_t D = data.front().dim();
  std::vector<double> sum(D, 0.0), sum2(D, 0.0);
  double n = 0.0;
  for (const auto& s : data) {
    for (std::size_t t = 0; t < s.size(); ++t) {
      for (std::size_t d = 0; d < D; ++d) sum[d] += s.frames(t, d);
    }
    n += s.size();
  }
  for (double& v : sum) v /= n;
  for (const auto& s : data) {
    for (std::size_t t = 0; t < s.size(); ++t) {
      for (std::size_t d = 0; d < D; ++d) {
        const double diff = s.frames(t, d) - sum[d];
        sum2[d] += diff * diff;
      }
    }
  }
  std::vector<double> floor(D);
  for (std::size_t d = 0; d < D; ++d) {
    floor[d] = std::max(opts.variance_floor_rel * sum2[d] / n, opts.variance_floor_abs);
  }
  return floor;
}

void Hmm1Model::validate() const {
  const std::size_t N = n_states();
  if (N == 0) throw ModelError("HMM has no states");
  if (trans.rows() != N || trans.cols() != N || emissions.size() != N) {
    throw ModelError("HMM parameter shapes disagree");
  }
  detail::check_stochastic(initial, "initial distribution");
  detail::check_rows_stochastic(trans, "transition row", false);
  for (const auto& e : emissions) {
    e.validate();
    if (e.dim() != dim()) throw ModelError("HMM emissions disagree on dimension");
  }
}

void DiscreteHmm1Model::validate() const {
  const std::size_t N = n_states();
  if (N == 0) throw ModelError("HMM has no states");
  if (trans.rows() != N || trans.cols() != N || emit.rows() != N || emit.cols() == 0) {
    throw ModelError("discrete HMM parameter shapes disagree");
  }
  detail::check_stochastic(initial, "initial distribution");
  detail::check_rows_stochastic(trans, "transition row", false);
  detail::check_rows_stochastic(emit, "emission row", false);
}

double forward_log_likelihood(std::span<const double> log_initial, const Matrix& log_trans,
                              const Matrix& log_emit) {
  const std::size_t T = log_emit.rows(), N = log_emit.cols();
  if (T == 0) throw ModelError("empty observation sequence");
  std::vector<double> prev(N), cur(N), scratch;
  scratch.reserve(N);
  for (std::size_t i = 0; i < N; ++i) prev[i] = log_initial[i] + log_emit(0, i);
  for (std::size_t t = 1; t < T; ++t) {
    for (std::size_t j = 0; j < N; ++j) {
      cur[j] = log_sum_exp_pairs(prev, log_trans, j, scratch) + log_emit(t, j);
    }
    std::swap(prev, cur);
  }
  return log_sum_exp(prev);
}

Lattice1 forward_backward(std::span<const double> log_initial, const Matrix& log_trans,
                          const Matrix& log_emit) {
  const std::size_t T = log_emit.rows(), N = log_emit.cols();
  if (T == 0) throw ModelError("empty observation sequence");
  Lattice1 out{Matrix(T, N, kLogZero), Matrix(T, N, 0.0), 0.0};
  std::vector<double> scratch;
  scratch.reserve(N);
  for (std::size_t i = 0; i < N; ++i) out.log_alpha(0, i) = log_initial[i] + log_emit(0, i);
  for (std::size_t t = 1; t < T; ++t) {
    for (std::size_t j = 0; j < N; ++j) {
      out.log_alpha(t, j) =
          log_sum_exp_pairs(out.log_alpha.row(t - 1), log_trans, j, scratch) + log_emit(t, j);
    }
  }
  out.log_likelihood = log_sum_exp(out.log_alpha.row(T - 1));
  for (std::size_t t = T - 1; t-- > 0;) {
    for (std::size_t i = 0; i < N; ++i) {
      scratch.clear();
      for (std::size_t j = 0; j < N; ++j) {
        const double lt = log_trans(i, j);
        if (lt == kLogZero) continue;
        scratch.push_back(lt + log_emit(t + 1, j) + out.log_beta(t + 1, j));
      }
      out.log_beta(t, i) = log_sum_exp(scratch);
    }
  }
  return out;
}

Matrix emission_log_matrix(const Hmm1Model& model, const FeatureSequence& seq) {
  if (seq.size() == 0) throw ModelError("empty observation sequence");
  if (seq.dim() != model.dim()) {
    throw ModelError("feature dimension " + std::to_string(seq.dim()) +
                     " does not match model dimension " + std::to_string(model.dim()));
  }
  Matrix out(seq.size(), model.n_states());
  for (std::size_t t = 0; t < seq.size(); ++t) {
    for (std::size_t i = 0; i < model.n_states(); ++i) {
      out(t, i) = model.emissions[i].log_density(seq.frame(t));
    }
  }
  return out;
}

double log_likelihood(const Hmm1Model& model, const FeatureSequence& seq) {
  const Matrix log_emit = emission_log_matrix(model, seq);
  return forward_log_likelihood(detail::log_vector(model.initial),
                                detail::log_matrix(model.trans), log_emit);
}

namespace {

Matrix discrete_emission_log_matrix(const DiscreteHmm1Model& model, std::span<const int> symbols) {
  if (symbols.empty()) throw ModelError("empty observation sequence");
  Matrix out(symbols.size(), model.n_states());
  for (std::size_t t = 0; t < symbols.size(); ++t) {
    const int s = symbols[t];
    if (s < 0 || static_cast<std::size_t>(s) >= model.n_symbols()) {
      throw ModelError("symbol " + std::to_string(s) + " out of range");
    }
    for (std::size_t i = 0; i < model.n_states(); ++i) out(t, i) = safe_log(model.emit(i, s));
  }
  return out;
}

}  // namespace

double log_likelihood(const DiscreteHmm1Model& model, std::span<const int> symbols) {
  return forward_log_likelihood(detail::log_vector(model.initial),
                                detail::log_matrix(model.trans),
                                discrete_emission_log_matrix(model, symbols));
}

std::vector<std::vector<std::span<const double>>> segment_frames(
    std::span<const FeatureSequence> data, std::size_t n_states) {
  std::vector<std::vector<std::span<const double>>> pools(n_states);
  for (const auto& s : data) {
    const std::size_t T = s.size();
    for (std::size_t t = 0; t < T; ++t) pools[t * n_states / T].push_back(s.frame(t));
  }
  return pools;
}

Hmm1Model init_hmm(const HmmInitOptions& opts, std::span<const FeatureSequence> data,
                   const TrainOptions& train) {
  check_data(data, data.empty() ? 0 : data.front().dim());
  const std::size_t N = opts.n_states;
  if (N == 0 || opts.n_mix == 0) throw TrainingError("need at least one state and component");

  Hmm1Model model;
  model.initial.assign(N, 0.0);
  model.initial[0] = 1.0;
  model.trans = Matrix(N, N);
  for (std::size_t i = 0; i < N; ++i) {
    const std::size_t last = std::min(N - 1, i + opts.max_jump);
    for (std::size_t j = i; j <= last; ++j) model.trans(i, j) = 1.0 / (last - i + 1);
  }

  const auto floor = variance_floor_for(data, train);
  auto pools = segment_frames(data, N);
  std::mt19937_64 rng(opts.seed);
  // Short sequences can leave late states without frames; they borrow the
  // nearest earlier non-empty pool.
  for (std::size_t i = 0; i < N; ++i) {
    const auto* pool = &pools[i];
    for (std::size_t k = i; pool->empty() && k-- > 0;) pool = &pools[k];
    model.emissions.push_back(fit_gmm_kmeans(*pool, opts.n_mix, floor, rng, opts.kmeans_iters));
  }
  model.validate();
  return model;
}

Hmm1TrainResult train_baum_welch(Hmm1Model model, std::span<const FeatureSequence> data,
                                 const TrainOptions& opts) {
  model.validate();
  check_data(data, model.dim());
  const auto floor = variance_floor_for(data, opts);
  Hmm1TrainResult result;

  for (int iter = 0;; ++iter) {
    const auto log_initial = detail::log_vector(model.initial);
    const auto log_trans = detail::log_matrix(model.trans);
    const Hmm1Stats stats = detail::chunked_estep<Hmm1Stats>(
        data.size(), opts.workers, [&] { return Hmm1Stats(model); },
        [&](std::size_t k, Hmm1Stats& s) {
          accumulate_sequence(model, log_initial, log_trans, data[k], s);
        });
    if (!std::isfinite(stats.log_likelihood)) throw TrainingError("non-finite log-likelihood");
    result.trace.log_likelihood.push_back(stats.log_likelihood);
    if (detail::em_should_stop(result.trace, iter, opts.max_iters, opts.tol)) break;

    detail::normalize_into(stats.initial, model.initial);
    detail::normalize_rows_into(stats.trans, model.trans);
    for (std::size_t i = 0; i < model.n_states(); ++i) {
      if (!update_gmm(model.emissions[i], stats.gmm[i], floor)) {
        throw TrainingError("state " + std::to_string(i) +
                            " received no occupancy (degenerate initialisation)");
      }
    }
  }
  result.model = std::move(model);
  return result;
}

namespace {

struct DiscreteStats {
  double log_likelihood = 0.0;
  std::vector<double> initial;
  Matrix trans;
  Matrix emit;

  explicit DiscreteStats(const DiscreteHmm1Model& m)
      : initial(m.n_states(), 0.0), trans(m.n_states(), m.n_states()),
        emit(m.n_states(), m.n_symbols()) {}

  void add(const DiscreteStats& o) {
    log_likelihood += o.log_likelihood;
    for (std::size_t i = 0; i < initial.size(); ++i) initial[i] += o.initial[i];
    detail::add_into(trans.flat(), o.trans.flat());
    detail::add_into(emit.flat(), o.emit.flat());
  }
};

}  // namespace

DiscreteHmm1TrainResult train_baum_welch(DiscreteHmm1Model model,
                                         std::span<const std::vector<int>> data,
                                         const TrainOptions& opts) {
  model.validate();
  if (data.empty()) throw TrainingError("no training sequences");
  DiscreteHmm1TrainResult result;
  for (int iter = 0;; ++iter) {
    const auto log_initial = detail::log_vector(model.initial);
    const auto log_trans = detail::log_matrix(model.trans);
    const DiscreteStats stats = detail::chunked_estep<DiscreteStats>(
        data.size(), opts.workers, [&] { return DiscreteStats(model); },
        [&](std::size_t k, DiscreteStats& s) {
          const Matrix log_emit = discrete_emission_log_matrix(model, data[k]);
          const Lattice1 fb = forward_backward(log_initial, log_trans, log_emit);
          if (!std::isfinite(fb.log_likelihood)) {
            throw TrainingError("training sequence has zero probability under the model");
          }
          s.log_likelihood += fb.log_likelihood;
          accumulate_transitions(fb, log_trans, log_emit, s.initial, s.trans);
          for (std::size_t t = 0; t < data[k].size(); ++t) {
            for (std::size_t i = 0; i < model.n_states(); ++i) {
              s.emit(i, data[k][t]) +=
                  std::exp(fb.log_alpha(t, i) + fb.log_beta(t, i) - fb.log_likelihood);
            }
          }
        });
    result.trace.log_likelihood.push_back(stats.log_likelihood);
    if (detail::em_should_stop(result.trace, iter, opts.max_iters, opts.tol)) break;
    detail::normalize_into(stats.initial, model.initial);
    detail::normalize_rows_into(stats.trans, model.trans);
    detail::normalize_rows_into(stats.emit, model.emit);
  }
  result.model = std::move(model);
  return result;
}

}  // namespace talkcond
