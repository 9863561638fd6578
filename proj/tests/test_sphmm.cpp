#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "talkcond/classify.hpp"
#include "talkcond/error.hpp"
#include "talkcond/sphmm.hpp"

using namespace talkcond;

namespace {

Hmm1Model trained_acoustic(std::size_t n_states, std::mt19937_64& rng) {
  const auto data = oracle::gaussian_sequences(rng, 8, 3, 20, 30);
  HmmInitOptions init;
  init.n_states = n_states;
  init.n_mix = 2;
  TrainOptions opts;
  opts.max_iters = 3;
  return train_baum_welch(init_hmm(init, data), data, opts).model;
}

}  // namespace

TEST_CASE("prosodic model has acoustic states / grouping states") {
  std::mt19937_64 rng(1);
  const auto acoustic = trained_acoustic(9, rng);
  const auto prosodic = oracle::gaussian_sequences(rng, 10, 4, 8, 14);
  SphmmOptions opts;
  const auto m = train_sphmm(acoustic, prosodic, opts);
  CHECK(m.prosodic.n_states() == 3);
  CHECK(m.grouping == 3);
  CHECK(m.alpha == 0.5);
  CHECK(m.acoustic == acoustic);
}

TEST_CASE("invalid alpha and grouping are rejected") {
  std::mt19937_64 rng(2);
  const auto prosodic = oracle::gaussian_sequences(rng, 6, 4, 8, 14);
  SphmmOptions opts;
  opts.alpha = 1.5;
  CHECK_THROWS_AS(train_sphmm(trained_acoustic(9, rng), prosodic, opts), ModelError);
  opts.alpha = -0.1;
  CHECK_THROWS_AS(train_sphmm(trained_acoustic(9, rng), prosodic, opts), ModelError);
  opts.alpha = 0.5;
  CHECK_THROWS_AS(train_sphmm(trained_acoustic(4, rng), prosodic, opts), ModelError);
}

TEST_CASE("fusion endpoints and affine form") {
  CHECK(fuse_scores(0.5, -100.0, -60.0) == -80.0);
  CHECK(fuse_scores(0.0, -100.0, -60.0) == -100.0);
  CHECK(fuse_scores(1.0, -100.0, -60.0) == -60.0);

  std::mt19937_64 rng(3);
  auto m = train_sphmm(trained_acoustic(6, rng), oracle::gaussian_sequences(rng, 8, 4, 8, 12),
                       SphmmOptions{0.5, 3, 2, 1, 1});
  const auto ac = oracle::gaussian_sequences(rng, 1, 3, 25, 25).front();
  const auto pr = oracle::gaussian_sequences(rng, 1, 4, 10, 10).front();
  const double la = log_likelihood(m.acoustic, ac), lp = log_likelihood(m.prosodic, pr);
  m.alpha = 0.0;
  CHECK(fused_log_likelihood(m, ac, pr) == la);
  m.alpha = 1.0;
  CHECK(fused_log_likelihood(m, ac, pr) == lp);
  for (double a : {0.1, 0.3, 0.5, 0.7, 0.9}) {
    m.alpha = a;
    CHECK(std::abs(fused_log_likelihood(m, ac, pr) - (la + a * (lp - la))) <= 1e-12);
  }
}

TEST_CASE("shifting every acoustic score keeps the fused ranking") {
  const std::vector<double> ac{-120, -100, -140, -101}, pr{-50, -58, -40, -52};
  for (double alpha : {0.0, 0.25, 0.5, 0.75}) {
    std::vector<double> a, b;
    for (std::size_t v = 0; v < ac.size(); ++v) {
      a.push_back(fuse_scores(alpha, ac[v], pr[v]));
      b.push_back(fuse_scores(alpha, ac[v] + 37.0, pr[v]));
      CHECK(b.back() - a.back() == doctest::Approx((1 - alpha) * 37.0));
    }
    CHECK(argmax_score(a) == argmax_score(b));
  }
}
