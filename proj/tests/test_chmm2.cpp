#include <algorithm>
#include <cmath>
#include <numeric>
#include <limits>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "talkcond/chmm2.hpp"
#include "talkcond/error.hpp"
#include "talkcond/logmath.hpp"

using namespace talkcond;

TEST_CASE("ring neighbourhoods wrap and deduplicate") {
  CHECK(ring_neighbours(0, 9) == std::vector<std::size_t>{0, 1, 8});
  CHECK(ring_neighbours(8, 9) == std::vector<std::size_t>{0, 7, 8});
  CHECK(ring_neighbours(1, 2) == std::vector<std::size_t>{0, 1});
  CHECK(ring_neighbours(0, 1) == std::vector<std::size_t>{0});
  CHECK(ring_adjacent(8, 0, 9));
  CHECK_FALSE(ring_adjacent(2, 5, 9));
}

TEST_CASE("init_chmm2 band values") {
  std::mt19937_64 rng(1);
  const auto data = oracle::gaussian_sequences(rng, 6, 2, 20, 30);
  HmmInitOptions init;
  init.n_mix = 2;

  SUBCASE("N = 3 is a complete band of 1/3") {
    init.n_states = 3;
    const auto m = init_chmm2(init, data);
    for (double a : m.trans2.flat()) CHECK(a == doctest::Approx(1.0 / 3.0));
    for (double p : m.initial_pair.flat()) CHECK(p == doctest::Approx(1.0 / 9.0));
  }
  SUBCASE("N = 9 has three entries of 1/3 per supported row") {
    init.n_states = 9;
    const auto m = init_chmm2(init, data);
    double pair_sum = 0.0;
    for (std::size_t i = 0; i < 9; ++i) {
      for (std::size_t j = 0; j < 9; ++j) {
        const auto row = m.trans2.row(i * 9 + j);
        const auto nz = std::count_if(row.begin(), row.end(), [](double a) { return a != 0.0; });
        if (ring_adjacent(i, j, 9)) {
          CHECK(nz == 3);
          for (double a : row) CHECK((a == 0.0 || a == doctest::Approx(1.0 / 3.0)));
          CHECK(m.initial_pair(i, j) == doctest::Approx(1.0 / 27.0));
        } else {
          CHECK(nz == 0);
          CHECK(m.initial_pair(i, j) == 0.0);
        }
        pair_sum += m.initial_pair(i, j);
      }
    }
    CHECK(pair_sum == doctest::Approx(1.0));
  }
}

TEST_CASE("uniform N = 2 model gives 1/8 to every length-3 sequence") {
  const auto m = uniform_discrete_chmm2(2, 2);
  double total = 0.0;
  oracle::for_each_sequence(2, 3, [&](const std::vector<int>& o) {
    const double p = std::exp(log_likelihood(m, o));
    CHECK(p == doctest::Approx(0.125).epsilon(1e-14));
    total += p;
  });
  CHECK(total == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("forward likelihood matches second-order path enumeration") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 40; ++trial) {
    const auto m = oracle::random_discrete_chmm2(rng, 3, 3, trial % 4 == 0 ? 0.3 : 0.0);
    std::vector<int> obs(5);
    for (auto& o : obs) o = static_cast<int>(rng() % 3);
    const double bf = oracle::brute_force(m, obs);
    const double ll = log_likelihood(m, obs);
    if (bf == 0.0) {
      CHECK(ll == kLogZero);
    } else {
      CHECK(oracle::close_rel(std::exp(ll), bf, 1e-10));
    }
  }
}

TEST_CASE("alpha and beta marginalize to log P on every slice") {
  std::mt19937_64 rng(9);
  const auto m = oracle::random_discrete_chmm2(rng, 4, 3);
  const std::vector<int> obs{0, 1, 2, 2, 1, 0, 1};
  const auto lat = forward_backward(m, obs);
  CHECK(lat.log_likelihood == log_sum_exp(lat.alpha.back().flat()));
  for (std::size_t t = 0; t < obs.size(); ++t) {
    std::vector<double> v;
    for (std::size_t p = 0; p < 16; ++p) v.push_back(lat.alpha[t].flat()[p] + lat.beta[t].flat()[p]);
    CHECK(std::abs(log_sum_exp(v) - lat.log_likelihood) <= 1e-8);
  }
}

TEST_CASE("sequences shorter than two frames are rejected") {
  const auto m = uniform_discrete_chmm2(3, 2);
  CHECK_THROWS_AS(log_likelihood(m, std::vector<int>{1}), ModelError);
}

TEST_CASE("an i-independent model reduces to a first-order circular HMM") {
  std::mt19937_64 rng(31);
  const std::size_t N = 5;
  Matrix a1(N, N);
  for (std::size_t j = 0; j < N; ++j) {
    std::vector<bool> ok(N);
    for (std::size_t k = 0; k < N; ++k) ok[k] = oracle::ring_adj(j, k, N);
    const auto row = oracle::random_simplex(rng, N, 0.0, &ok);
    for (std::size_t k = 0; k < N; ++k) a1(j, k) = row[k];
  }
  const auto p0 = oracle::random_simplex(rng, N);
  const auto data = oracle::gaussian_sequences(rng, 4, 2, 10, 20);
  HmmInitOptions init;
  init.n_states = N;
  init.n_mix = 2;
  Chmm2Model second = init_chmm2(init, data);
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t j = 0; j < N; ++j) {
      second.initial_pair(i, j) = p0[i] * a1(i, j);
      for (std::size_t k = 0; k < N; ++k) {
        second.trans2(i * N + j, k) = oracle::ring_adj(i, j, N) ? a1(j, k) : 0.0;
      }
    }
  }
  second.validate();
  Hmm1Model first{p0, a1, second.emissions};
  for (const auto& s : oracle::gaussian_sequences(rng, 10, 2, 2, 15)) {
    CHECK(std::abs(log_likelihood(second, s) - log_likelihood(first, s)) <= 1e-9);
  }
}

TEST_CASE("continuous second-order EM is monotone and keeps the band") {
  std::mt19937_64 rng(5);
  const auto data = oracle::gaussian_sequences(rng, 15, 2);
  HmmInitOptions init;
  init.n_states = 4;
  init.n_mix = 2;
  TrainOptions opts;
  opts.max_iters = 12;
  opts.tol = -std::numeric_limits<double>::infinity();
  const auto r = train_chmm2(init_chmm2(init, data), data, opts);
  for (std::size_t k = 1; k < r.trace.log_likelihood.size(); ++k) {
    CHECK(r.trace.log_likelihood[k] >= r.trace.log_likelihood[k - 1] - 1e-9);
  }
  r.model.validate();
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j)
      for (std::size_t k = 0; k < 4; ++k)
        if (!(ring_adjacent(i, j, 4) && ring_adjacent(j, k, 4))) CHECK(r.model.a(i, j, k) == 0.0);
}

TEST_CASE("worker count does not change second-order training") {
  std::mt19937_64 rng(6);
  const auto data = oracle::gaussian_sequences(rng, 19, 2);
  HmmInitOptions init;
  init.n_states = 3;
  init.n_mix = 1;
  TrainOptions a;
  a.max_iters = 4;
  TrainOptions b = a;
  b.workers = 3;
  const auto m0 = init_chmm2(init, data);
  CHECK(train_chmm2(m0, data, a).model == train_chmm2(m0, data, b).model);
}

TEST_CASE("discrete second-order EM recovers a known tensor") {
  std::mt19937_64 rng(4242);
  // Each (previous, current) pair gets its own dominant symbol so pairs are
  // identifiable through the per-pair emission rows, and transitions are pulled
  // toward uniform so every context is visited often.
  auto truth = oracle::random_discrete_chmm2(rng, 3, 9);
  for (auto& v : truth.trans2.flat()) v = 0.5 * v + 0.5 / 3.0;
  const double off = 0.1 / 8.0;
  truth.first_emit.fill(off);
  truth.pair_emit.fill(off);
  for (std::size_t i = 0; i < 3; ++i) truth.first_emit(i, 4 * i) = 0.9;
  for (std::size_t p = 0; p < 9; ++p) truth.pair_emit(p, p) = 0.9;
  truth.validate();
  std::vector<std::vector<int>> data;
  for (int n = 0; n < 500; ++n) data.push_back(oracle::sample(truth, 20, rng));

  DiscreteChmm2Model init = truth;
  std::mt19937_64 rng2(1);
  const auto perturbed = oracle::random_discrete_chmm2(rng2, 3, 9);
  for (std::size_t p = 0; p < 27; ++p) {
    init.trans2.flat()[p] = 0.5 * truth.trans2.flat()[p] + 0.5 * perturbed.trans2.flat()[p];
  }
  TrainOptions opts;
  opts.max_iters = 300;
  opts.tol = 1e-7;
  const auto r = train_chmm2(init, data, opts);
  for (std::size_t p = 0; p < 27; ++p) {
    CHECK(std::abs(r.model.trans2.flat()[p] - truth.trans2.flat()[p]) <= 0.05);
  }
  for (std::size_t p = 0; p < 9; ++p) {
    const auto row = r.model.trans2.row(p);
    CHECK(std::accumulate(row.begin(), row.end(), 0.0) == doctest::Approx(1.0));
  }
}
