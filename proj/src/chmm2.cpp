#include "talkcond/chmm2.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "estep.hpp"
#include "talkcond/error.hpp"
#include "talkcond/kernels.hpp"
#include "talkcond/logmath.hpp"

namespace talkcond {

std::vector<std::size_t> ring_neighbours(std::size_t x, std::size_t n) {
  std::vector<std::size_t> out{(x + n - 1) % n, x, (x + 1) % n};
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

bool ring_adjacent(std::size_t from, std::size_t to, std::size_t n) {
  const std::size_t d = (to + n - from) % n;
  return d == 0 || d == 1 || d == n - 1;
}

namespace {

void check_band(const Matrix& initial_pair, const Matrix& trans2) {
  const std::size_t N = initial_pair.rows();
  if (N == 0 || initial_pair.cols() != N) throw ModelError("initial pair matrix must be N x N");
  if (trans2.rows() != N * N || trans2.cols() != N) {
    throw ModelError("second-order transition tensor must be N x N x N");
  }
  detail::check_stochastic(initial_pair.flat(), "initial pair distribution");
  detail::check_rows_stochastic(trans2, "second-order transition row", true);
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t j = 0; j < N; ++j) {
      if (initial_pair(i, j) != 0.0 && !ring_adjacent(i, j, N)) {
        throw ModelError("initial pair outside the circular band");
      }
      for (std::size_t k = 0; k < N; ++k) {
        if (trans2(i * N + j, k) != 0.0 && !(ring_adjacent(i, j, N) && ring_adjacent(j, k, N))) {
          throw ModelError("second-order transition outside the circular band");
        }
      }
    }
  }
}

Matrix band_initial_pair(std::size_t N) {
  Matrix pi(N, N);
  std::size_t allowed = 0;
  for (std::size_t i = 0; i < N; ++i) allowed += ring_neighbours(i, N).size();
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t j : ring_neighbours(i, N)) pi(i, j) = 1.0 / allowed;
  }
  return pi;
}

Matrix band_trans2(std::size_t N) {
  Matrix a(N * N, N);
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t j : ring_neighbours(i, N)) {
      const auto ks = ring_neighbours(j, N);
      for (std::size_t k : ks) a(i * N + j, k) = 1.0 / ks.size();
    }
  }
  return a;
}

void check_length(std::size_t T) {
  if (T < 2) throw ModelError("second-order lattice needs at least 2 observations");
}

// alpha_t(j,k) = LSE_i[prev(i,j) + log a_ijk] + pair(t, j,k)
void forward_step(const Matrix& prev, const Matrix& log_trans2, std::span<const double> pair,
                  Matrix& cur, std::vector<double>& scratch) {
  const std::size_t N = prev.rows();
  for (std::size_t j = 0; j < N; ++j) {
    for (std::size_t k = 0; k < N; ++k) {
      scratch.clear();
      for (std::size_t i = 0; i < N; ++i) {
        const double la = log_trans2(i * N + j, k);
        if (la == kLogZero || prev(i, j) == kLogZero) continue;
        scratch.push_back(prev(i, j) + la);
      }
      cur(j, k) = scratch.empty() ? kLogZero : log_sum_exp(scratch) + pair[j * N + k];
    }
  }
}

Matrix first_slice(const Matrix& log_initial_pair, const Chmm2Emissions& em) {
  const std::size_t N = log_initial_pair.rows();
  Matrix a0(N, N);
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t k = 0; k < N; ++k) a0(i, k) = log_initial_pair(i, k) + em.log_first[i];
  }
  return a0;
}

void add_pair(Matrix& slice, std::span<const double> pair) {
  for (std::size_t c = 0; c < pair.size(); ++c) slice.flat()[c] += pair[c];
}

}  // namespace

void Chmm2Model::validate() const {
  check_band(initial_pair, trans2);
  if (emissions.size() != n_states()) throw ModelError("CHMM2 needs one emission per state");
  for (const auto& e : emissions) {
    e.validate();
    if (e.dim() != dim()) throw ModelError("CHMM2 emissions disagree on dimension");
  }
}

void DiscreteChmm2Model::validate() const {
  check_band(initial_pair, trans2);
  const std::size_t N = n_states();
  if (first_emit.rows() != N || pair_emit.rows() != N * N || first_emit.cols() == 0 ||
      pair_emit.cols() != first_emit.cols()) {
    throw ModelError("discrete CHMM2 emission shapes disagree");
  }
  detail::check_rows_stochastic(first_emit, "first emission row", false);
  detail::check_rows_stochastic(pair_emit, "pair emission row", false);
}

Chmm2Emissions chmm2_emissions(const Chmm2Model& model, const FeatureSequence& seq) {
  check_length(seq.size());
  const std::size_t T = seq.size(), N = model.n_states();
  Matrix per_state(T, N);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t k = 0; k < N; ++k) per_state(t, k) = model.emissions[k].log_density(seq.frame(t));
  }
  Chmm2Emissions em{std::vector<double>(per_state.row(0).begin(), per_state.row(0).end()),
                    Matrix(T, N * N, 0.0)};
  for (std::size_t t = 1; t < T; ++t) {
    for (std::size_t j = 0; j < N; ++j) {
      for (std::size_t k = 0; k < N; ++k) em.log_pair(t, j * N + k) = per_state(t, k);
    }
  }
  return em;
}

Chmm2Emissions chmm2_emissions(const DiscreteChmm2Model& model, std::span<const int> symbols) {
  check_length(symbols.size());
  const std::size_t T = symbols.size(), N = model.n_states();
  for (int s : symbols) {
    if (s < 0 || static_cast<std::size_t>(s) >= model.n_symbols()) {
      throw ModelError("symbol " + std::to_string(s) + " out of range");
    }
  }
  Chmm2Emissions em{std::vector<double>(N), Matrix(T, N * N, 0.0)};
  for (std::size_t i = 0; i < N; ++i) em.log_first[i] = safe_log(model.first_emit(i, symbols[0]));
  for (std::size_t t = 1; t < T; ++t) {
    for (std::size_t p = 0; p < N * N; ++p) {
      em.log_pair(t, p) = safe_log(model.pair_emit(p, symbols[t]));
    }
  }
  return em;
}

double chmm2_forward_log_likelihood(const Matrix& log_initial_pair, const Matrix& log_trans2,
                                    const Chmm2Emissions& em) {
  const std::size_t T = em.log_pair.rows(), N = log_initial_pair.rows();
  check_length(T);
  Matrix prev = first_slice(log_initial_pair, em);
  add_pair(prev, em.log_pair.row(1));
  Matrix cur(N, N);
  std::vector<double> scratch;
  scratch.reserve(N);
  for (std::size_t t = 2; t < T; ++t) {
    forward_step(prev, log_trans2, em.log_pair.row(t), cur, scratch);
    std::swap(prev, cur);
  }
  return log_sum_exp(prev.flat());
}

Chmm2Lattice chmm2_forward_backward(const Matrix& log_initial_pair, const Matrix& log_trans2,
                                    const Chmm2Emissions& em) {
  const std::size_t T = em.log_pair.rows(), N = log_initial_pair.rows();
  check_length(T);
  Chmm2Lattice lat;
  lat.alpha.reserve(T);
  lat.alpha.push_back(first_slice(log_initial_pair, em));
  lat.alpha.push_back(lat.alpha[0]);
  add_pair(lat.alpha[1], em.log_pair.row(1));
  std::vector<double> scratch;
  scratch.reserve(N);
  for (std::size_t t = 2; t < T; ++t) {
    Matrix cur(N, N);
    forward_step(lat.alpha[t - 1], log_trans2, em.log_pair.row(t), cur, scratch);
    lat.alpha.push_back(std::move(cur));
  }
  lat.log_likelihood = log_sum_exp(lat.alpha[T - 1].flat());

  lat.beta.assign(T, Matrix(N, N, 0.0));
  for (std::size_t t = T - 1; t-- > 1;) {
    const Matrix& next = lat.beta[t + 1];
    const auto pair = em.log_pair.row(t + 1);
    for (std::size_t i = 0; i < N; ++i) {
      for (std::size_t j = 0; j < N; ++j) {
        scratch.clear();
        for (std::size_t k = 0; k < N; ++k) {
          const double la = log_trans2(i * N + j, k);
          if (la == kLogZero) continue;
          scratch.push_back(la + pair[j * N + k] + next(j, k));
        }
        lat.beta[t](i, j) = log_sum_exp(scratch);
      }
    }
  }
  lat.beta[0] = lat.beta[1];
  add_pair(lat.beta[0], em.log_pair.row(1));
  return lat;
}

Chmm2Lattice forward_backward(const Chmm2Model& model, const FeatureSequence& seq) {
  if (seq.dim() != model.dim()) throw ModelError("feature dimension does not match CHMM2");
  return chmm2_forward_backward(detail::log_matrix(model.initial_pair),
                                detail::log_matrix(model.trans2), chmm2_emissions(model, seq));
}

Chmm2Lattice forward_backward(const DiscreteChmm2Model& model, std::span<const int> symbols) {
  return chmm2_forward_backward(detail::log_matrix(model.initial_pair),
                                detail::log_matrix(model.trans2),
                                chmm2_emissions(model, symbols));
}

double log_likelihood(const Chmm2Model& model, const FeatureSequence& seq) {
  if (seq.dim() != model.dim()) throw ModelError("feature dimension does not match CHMM2");
  return chmm2_forward_log_likelihood(detail::log_matrix(model.initial_pair),
                                      detail::log_matrix(model.trans2),
                                      chmm2_emissions(model, seq));
}

double log_likelihood(const DiscreteChmm2Model& model, std::span<const int> symbols) {
  return chmm2_forward_log_likelihood(detail::log_matrix(model.initial_pair),
                                      detail::log_matrix(model.trans2),
                                      chmm2_emissions(model, symbols));
}

Chmm2Model init_chmm2(const HmmInitOptions& opts, std::span<const FeatureSequence> data,
                      const TrainOptions& train) {
  if (data.empty()) throw TrainingError("no training sequences");
  const std::size_t N = opts.n_states;
  if (N == 0 || opts.n_mix == 0) throw TrainingError("need at least one state and component");
  for (const auto& s : data) {
    if (s.size() < 2) throw TrainingError("CHMM2 training sequences need T >= 2");
    if (s.dim() != data.front().dim()) throw TrainingError("training sequences disagree on dimension");
  }
  Chmm2Model model;
  model.initial_pair = band_initial_pair(N);
  model.trans2 = band_trans2(N);
  const auto floor = variance_floor_for(data, train);
  auto pools = segment_frames(data, N);
  std::mt19937_64 rng(opts.seed);
  for (std::size_t i = 0; i < N; ++i) {
    const auto* pool = &pools[i];
    for (std::size_t k = i; pool->empty() && k-- > 0;) pool = &pools[k];
    model.emissions.push_back(fit_gmm_kmeans(*pool, opts.n_mix, floor, rng, opts.kmeans_iters));
  }
  model.validate();
  return model;
}

DiscreteChmm2Model uniform_discrete_chmm2(std::size_t N, std::size_t M) {
  if (N == 0 || M == 0) throw ModelError("need at least one state and symbol");
  return {band_initial_pair(N), band_trans2(N), Matrix(N, M, 1.0 / M), Matrix(N * N, M, 1.0 / M)};
}

namespace {

// Pair/triple statistics shared by both emission modes.
struct Chmm2Counts {
  double log_likelihood = 0.0;
  Matrix initial_pair;
  Matrix trans2;

  explicit Chmm2Counts(std::size_t N) : initial_pair(N, N), trans2(N * N, N) {}
  void add(const Chmm2Counts& o) {
    log_likelihood += o.log_likelihood;
    detail::add_into(initial_pair.flat(), o.initial_pair.flat());
    detail::add_into(trans2.flat(), o.trans2.flat());
  }
};

// Adds pair/triple posteriors; returns per-slice pair posteriors (prob).
std::vector<Matrix> accumulate_lattice(const Chmm2Lattice& lat, const Matrix& log_trans2,
                                       const Chmm2Emissions& em, Chmm2Counts& counts) {
  const std::size_t T = lat.alpha.size(), N = counts.initial_pair.rows();
  const double ll = lat.log_likelihood;
  if (!std::isfinite(ll)) throw TrainingError("training sequence has zero probability under the model");
  counts.log_likelihood += ll;

  std::vector<Matrix> post(T, Matrix(N, N));
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t p = 0; p < N * N; ++p) {
      post[t].flat()[p] = std::exp(lat.alpha[t].flat()[p] + lat.beta[t].flat()[p] - ll);
    }
  }
  detail::add_into(counts.initial_pair.flat(), post[1].flat());
  for (std::size_t t = 2; t < T; ++t) {
    const auto pair = em.log_pair.row(t);
    for (std::size_t i = 0; i < N; ++i) {
      for (std::size_t j = 0; j < N; ++j) {
        const double a = lat.alpha[t - 1](i, j);
        if (a == kLogZero) continue;
        for (std::size_t k = 0; k < N; ++k) {
          const double la = log_trans2(i * N + j, k);
          if (la == kLogZero) continue;
          counts.trans2(i * N + j, k) +=
              std::exp(a + la + pair[j * N + k] + lat.beta[t](j, k) - ll);
        }
      }
    }
  }
  return post;
}

void update_structure(const Chmm2Counts& counts, Matrix& initial_pair, Matrix& trans2) {
  detail::normalize_into(counts.initial_pair.flat(), initial_pair.flat());
  detail::normalize_rows_into(counts.trans2, trans2);
}

struct ContinuousStats {
  Chmm2Counts counts;
  std::vector<GmmStats> gmm;

  explicit ContinuousStats(const Chmm2Model& m) : counts(m.n_states()) {
    for (const auto& e : m.emissions) gmm.emplace_back(e.n_mix(), e.dim());
  }
  void add(const ContinuousStats& o) {
    counts.add(o.counts);
    for (std::size_t i = 0; i < gmm.size(); ++i) gmm[i].add(o.gmm[i]);
  }
};

struct DiscreteStats {
  Chmm2Counts counts;
  Matrix first_emit;
  Matrix pair_emit;

  explicit DiscreteStats(const DiscreteChmm2Model& m)
      : counts(m.n_states()), first_emit(m.n_states(), m.n_symbols()),
        pair_emit(m.n_states() * m.n_states(), m.n_symbols()) {}
  void add(const DiscreteStats& o) {
    counts.add(o.counts);
    detail::add_into(first_emit.flat(), o.first_emit.flat());
    detail::add_into(pair_emit.flat(), o.pair_emit.flat());
  }
};

// Posterior that frame t was emitted by state k.
double state_posterior(const std::vector<Matrix>& post, std::size_t t, std::size_t k) {
  const std::size_t N = post[0].rows();
  double g = 0.0;
  if (t == 0) {
    for (std::size_t j = 0; j < N; ++j) g += post[1](k, j);
  } else {
    for (std::size_t j = 0; j < N; ++j) g += post[t](j, k);
  }
  return g;
}

}  // namespace

Chmm2TrainResult train_chmm2(Chmm2Model model, std::span<const FeatureSequence> data,
                             const TrainOptions& opts) {
  model.validate();
  if (data.empty()) throw TrainingError("no training sequences");
  for (const auto& s : data) {
    if (s.size() < 2) throw TrainingError("CHMM2 training sequences need T >= 2");
    if (s.dim() != model.dim()) throw TrainingError("sequence dimension does not match model");
  }
  const auto floor = variance_floor_for(data, opts);
  const std::size_t N = model.n_states();
  Chmm2TrainResult result;

  for (int iter = 0;; ++iter) {
    const Matrix log_pi = detail::log_matrix(model.initial_pair);
    const Matrix log_a = detail::log_matrix(model.trans2);
    const ContinuousStats stats = detail::chunked_estep<ContinuousStats>(
        data.size(), opts.workers, [&] { return ContinuousStats(model); },
        [&](std::size_t n, ContinuousStats& s) {
          const FeatureSequence& seq = data[n];
          const Chmm2Emissions em = chmm2_emissions(model, seq);
          const Chmm2Lattice lat = chmm2_forward_backward(log_pi, log_a, em);
          const auto post = accumulate_lattice(lat, log_a, em, s.counts);
          std::vector<double> comp;
          for (std::size_t t = 0; t < seq.size(); ++t) {
            const auto x = seq.frame(t);
            for (std::size_t k = 0; k < N; ++k) {
              const double g = state_posterior(post, t, k);
              if (g == 0.0) continue;
              const auto& e = model.emissions[k];
              comp.resize(e.n_mix());
              e.component_log_densities(x, comp);
              const double total = log_sum_exp(comp);
              for (std::size_t m = 0; m < e.n_mix(); ++m) {
                const double r = g * std::exp(comp[m] - total);
                if (r == 0.0) continue;
                s.gmm[k].occ[m] += r;
                kernels::accumulate_moments(r, x, e.means().row(m), s.gmm[k].s1.row(m),
                                            s.gmm[k].s2.row(m));
              }
            }
          }
        });
    if (!std::isfinite(stats.counts.log_likelihood)) throw TrainingError("non-finite log-likelihood");
    result.trace.log_likelihood.push_back(stats.counts.log_likelihood);
    if (detail::em_should_stop(result.trace, iter, opts.max_iters, opts.tol)) break;

    update_structure(stats.counts, model.initial_pair, model.trans2);
    for (std::size_t k = 0; k < N; ++k) {
      if (!update_gmm(model.emissions[k], stats.gmm[k], floor)) {
        throw TrainingError("state " + std::to_string(k) +
                            " received no occupancy (degenerate initialisation)");
      }
    }
  }
  result.model = std::move(model);
  return result;
}

DiscreteChmm2TrainResult train_chmm2(DiscreteChmm2Model model,
                                     std::span<const std::vector<int>> data,
                                     const TrainOptions& opts) {
  model.validate();
  if (data.empty()) throw TrainingError("no training sequences");
  const std::size_t N = model.n_states();
  DiscreteChmm2TrainResult result;
  for (int iter = 0;; ++iter) {
    const Matrix log_pi = detail::log_matrix(model.initial_pair);
    const Matrix log_a = detail::log_matrix(model.trans2);
    const DiscreteStats stats = detail::chunked_estep<DiscreteStats>(
        data.size(), opts.workers, [&] { return DiscreteStats(model); },
        [&](std::size_t n, DiscreteStats& s) {
          const auto& sym = data[n];
          const Chmm2Emissions em = chmm2_emissions(model, sym);
          const Chmm2Lattice lat = chmm2_forward_backward(log_pi, log_a, em);
          const auto post = accumulate_lattice(lat, log_a, em, s.counts);
          for (std::size_t i = 0; i < N; ++i) s.first_emit(i, sym[0]) += state_posterior(post, 0, i);
          for (std::size_t t = 1; t < sym.size(); ++t) {
            for (std::size_t p = 0; p < N * N; ++p) s.pair_emit(p, sym[t]) += post[t].flat()[p];
          }
        });
    result.trace.log_likelihood.push_back(stats.counts.log_likelihood);
    if (detail::em_should_stop(result.trace, iter, opts.max_iters, opts.tol)) break;
    update_structure(stats.counts, model.initial_pair, model.trans2);
    detail::normalize_rows_into(stats.first_emit, model.first_emit);
    detail::normalize_rows_into(stats.pair_emit, model.pair_emit);
  }
  result.model = std::move(model);
  return result;
}

}  // namespace talkcond
