// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <limits>
#include <random>
#include <string>

#include "oracles.hpp"
#include "talkcond/chmm2.hpp"
#include "talkcond/classify.hpp"
#include "talkcond/hmm.hpp"
#include "talkcond/logmath.hpp"
#include "talkcond/parallel.hpp"
#include "talkcond/protocol.hpp"
#include "talkcond/serialize.hpp"
#include "talkcond/sphmm.hpp"

using namespace talkcond;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  bool pass = true;
  std::string detail;

  void fail(const std::string& why) {
    if (pass) detail = why;
    pass = false;
  }
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

std::vector<int> random_symbols(std::mt19937_64& rng, std::size_t T, std::size_t M) {
  std::vector<int> obs(T);
  for (auto& o : obs) o = static_cast<int>(rng() % M);
  return obs;
}

// Probability-domain comparison; a zero oracle must give log P = -inf.
bool matches_oracle(double ll, double bf, double rel) {
  if (bf == 0.0) return ll == kLogZero;
  return oracle::close_rel(std::exp(ll), bf, rel);
}

Outcome hmm_oracle() {
  Outcome out;
  const auto start = Clock::now();
  std::mt19937_64 rng(20240101);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t N = 1 + trial % 4;
    const std::size_t M = 2 + trial % 2;
    const std::size_t T = 1 + (trial / 4) % 6;
    const auto m = oracle::random_discrete_hmm(rng, N, M, trial % 5 == 0 ? 0.3 : 0.0);
    const auto obs = random_symbols(rng, T, M);
    const double bf = oracle::brute_force(m, obs);
    const double ll = log_likelihood(m, obs);
    if (!matches_oracle(ll, bf, 1e-10)) out.fail(fmt("trial %.0f mismatch", trial));
    if (bf > 0.0) worst = std::max(worst, std::abs(std::exp(ll) - bf) / bf);
  }
  const double secs = seconds_since(start);
  if (secs >= 10.0) out.fail(fmt("took %.2f s", secs));
  if (out.pass) out.detail = fmt("200 models, max rel err %.2e, %.3f s", worst, secs);
  return out;
}

Outcome chmm2_oracle() {
  Outcome out;
  std::mt19937_64 rng(20240202);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t N = 2 + trial % 3;
    const std::size_t M = 2 + trial % 2;
    const std::size_t T = 2 + (trial / 3) % 5;
    const auto m = oracle::random_discrete_chmm2(rng, N, M, trial % 5 == 0 ? 0.3 : 0.0);
    const auto obs = random_symbols(rng, T, M);
    const double bf = oracle::brute_force(m, obs);
    const double ll = log_likelihood(m, obs);
    if (!matches_oracle(ll, bf, 1e-10)) out.fail(fmt("trial %.0f mismatch", trial));
    if (bf > 0.0) worst = std::max(worst, std::abs(std::exp(ll) - bf) / bf);

    const auto lat = forward_backward(m, obs);
    const double final_slice = log_sum_exp(lat.alpha.back().flat());
    if (lat.log_likelihood != final_slice || ll != final_slice) {
      out.fail(fmt("trial %.0f: log P differs from final-slice log-sum-exp", trial));
    }
  }
  if (out.pass) out.detail = fmt("200 models, max rel err %.2e, final-slice identity exact", worst);
  return out;
}

Outcome normalization() {
  Outcome out;
  std::mt19937_64 rng(20240303);
  double worst = 0.0;
  int checked = 0;
  const auto check = [&](double total) {
    worst = std::max(worst, std::abs(total - 1.0));
    ++checked;
    if (std::abs(total - 1.0) > 1e-9) out.fail(fmt("sum of P(O) = %.15g", total));
  };
  for (std::size_t M = 1; M <= 3; ++M) {
    for (std::size_t T = 1; T <= 4; ++T) {
      for (std::size_t N = 1; N <= 4; ++N) {
        const auto m = oracle::random_discrete_hmm(rng, N, M);
        double total = 0.0;
        oracle::for_each_sequence(M, T, [&](const std::vector<int>& o) {
          total += std::exp(log_likelihood(m, o));
        });
        check(total);
      }
      if (T < 2) continue;
      for (std::size_t N = 2; N <= 4; ++N) {
        const auto m = oracle::random_discrete_chmm2(rng, N, M);
        double total = 0.0;
        oracle::for_each_sequence(M, T, [&](const std::vector<int>& o) {
          total += std::exp(log_likelihood(m, o));
        });
        check(total);
      }
    }
  }
  if (out.pass) out.detail = fmt("%.0f models, max |sum - 1| %.2e", checked, worst);
  return out;
}

HmmInitOptions small_init(std::size_t states, std::size_t mix) {
  HmmInitOptions o;
  o.n_states = states;
  o.n_mix = mix;
  return o;
}

// Largest drop between consecutive trace entries (0 when monotone).
double worst_drop(const std::vector<double>& trace) {
  double worst = 0.0;
  for (std::size_t i = 1; i < trace.size(); ++i) worst = std::max(worst, trace[i - 1] - trace[i]);
  return worst;
}

Outcome em_monotone() {
  Outcome out;
  std::mt19937_64 rng(20240404);
  const auto data = oracle::gaussian_sequences(rng, 20, 3, 15, 30);
  TrainOptions opts;
  opts.max_iters = 40;
  opts.tol = -std::numeric_limits<double>::infinity();

  const auto hmm = train_baum_welch(init_hmm(small_init(5, 3), data), data, opts);
  const auto chmm2 = train_chmm2(init_chmm2(small_init(5, 3), data), data, opts);
  for (const auto* trace : {&hmm.trace.log_likelihood, &chmm2.trace.log_likelihood}) {
    if (trace->size() != 41) out.fail(fmt("trace has %.0f entries", trace->size()));
    if (worst_drop(*trace) > 1e-9) out.fail(fmt("drop of %.3e", worst_drop(*trace)));
  }
  if (out.pass) {
    out.detail = fmt("hmm %.3f -> %.3f, chmm2 %.3f -> ", hmm.trace.log_likelihood.front(),
                     hmm.trace.log_likelihood.back(), chmm2.trace.log_likelihood.front()) +
                 fmt("%.3f", chmm2.trace.log_likelihood.back());
  }
  return out;
}

Outcome reduction() {
  Outcome out;
  std::mt19937_64 rng(20240505);
  const std::size_t N = 6;
  Matrix a1(N, N);
  for (std::size_t j = 0; j < N; ++j) {
    std::vector<bool> ok(N);
    for (std::size_t k = 0; k < N; ++k) ok[k] = oracle::ring_adj(j, k, N);
    const auto row = oracle::random_simplex(rng, N, 0.0, &ok);
    for (std::size_t k = 0; k < N; ++k) a1(j, k) = row[k];
  }
  const auto p0 = oracle::random_simplex(rng, N);
  const auto fit = oracle::gaussian_sequences(rng, 6, 3, 12, 24);
  Chmm2Model second = init_chmm2(small_init(N, 2), fit);
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t j = 0; j < N; ++j) {
      second.initial_pair(i, j) = p0[i] * a1(i, j);
      for (std::size_t k = 0; k < N; ++k) {
        second.trans2(i * N + j, k) = oracle::ring_adj(i, j, N) ? a1(j, k) : 0.0;
      }
    }
  }
  second.validate();
  const Hmm1Model first{p0, a1, second.emissions};
  double worst = 0.0;
  for (const auto& s : oracle::gaussian_sequences(rng, 100, 3, 2, 40)) {
    worst = std::max(worst, std::abs(log_likelihood(second, s) - log_likelihood(first, s)));
  }
  if (worst > 1e-9) out.fail(fmt("max |diff| %.3e", worst));
  if (out.pass) out.detail = fmt("100 sequences, max |diff| %.2e", worst);
  return out;
}

ProtocolConfig protocol_config(ModelKind kind) {
  ProtocolConfig cfg;
  cfg.kind = kind;
  cfg.workers = default_workers();
  return cfg;
}

struct StressRun {
  CorpusManifest manifest;
  SplitSpec split;
  ProtocolResult hmm;
  double seconds = 0.0;
};

Outcome sphmm_fusion(const StressRun& run) {
  Outcome out;
  std::mt19937_64 rng(20240606);
  const auto ac_data = oracle::gaussian_sequences(rng, 10, 4, 20, 30);
  const auto pr_data = oracle::gaussian_sequences(rng, 10, 4, 4, 8);
  const auto acoustic = train_baum_welch(init_hmm(small_init(6, 2), ac_data), ac_data).model;
  auto model = train_sphmm(acoustic, pr_data, SphmmOptions{});
  for (std::size_t n = 0; n < ac_data.size(); ++n) {
    const double la = log_likelihood(model.acoustic, ac_data[n]);
    const double lp = log_likelihood(model.prosodic, pr_data[n]);
    model.alpha = 0.0;
    if (fused_log_likelihood(model, ac_data[n], pr_data[n]) != la) out.fail("alpha = 0 not exact");
    model.alpha = 1.0;
    if (fused_log_likelihood(model, ac_data[n], pr_data[n]) != lp) out.fail("alpha = 1 not exact");
    for (int step = 1; step < 10; ++step) {
      model.alpha = step / 10.0;
      const double expect = (1.0 - model.alpha) * la + model.alpha * lp;
      if (std::abs(fused_log_likelihood(model, ac_data[n], pr_data[n]) - expect) > 1e-12) {
        out.fail(fmt("affine identity off at alpha %.1f", model.alpha));
      }
    }
  }

  const auto rows =
      alpha_sweep(run.manifest, run.split, std::vector<double>{0.0}, protocol_config(ModelKind::kHmm));
  const auto& sweep = rows.front().evaluation.decisions;
  const auto& plain = run.hmm.evaluation.decisions;
  if (sweep.size() != plain.size()) {
    out.fail("decision counts differ");
  } else {
    for (std::size_t n = 0; n < plain.size(); ++n) {
      if (sweep[n].utterance != plain[n].utterance || sweep[n].predicted != plain[n].predicted) {
        out.fail(fmt("decision %.0f differs", n));
      }
    }
  }
  if (out.pass) out.detail = fmt("endpoints exact, %.0f alpha=0 decisions match hmm", plain.size());
  return out;
}

Outcome paper_arithmetic() {
  Outcome out;
  struct Avg {
    std::vector<double> row;
    double expect;
  };
  const std::vector<Avg> averages{
      {{92, 50.5, 60, 59, 63, 58.5}, 63.8},     {{93, 55, 66, 64, 67.5, 63}, 68.1},
      {{94.5, 58, 71.5, 68.5, 71, 68.5}, 72.0}, {{91, 43, 61, 58.5, 58, 61}, 62.1},
      {{94.5, 50.5, 64.5, 65, 61.5, 65.5}, 66.9}, {{95.5, 54, 68, 67.5, 66.5, 66.5}, 69.7},
  };
  for (const auto& a : averages) {
    const double got = average_performance(a.row);
    if (got != a.expect) out.fail(fmt("average %.1f expected %.1f", got, a.expect));
  }
  struct Rel {
    double now, base, expect;
  };
  const std::vector<Rel> rels{{71.5, 60, 19.2},  {54, 43, 25.6},    {72.0, 63.8, 12.9},
                              {72.0, 68.1, 5.7}, {69.7, 62.1, 12.2}, {69.7, 66.9, 4.2}};
  for (const auto& r : rels) {
    const double got = relative_improvement(r.now, r.base);
    if (got != r.expect) out.fail(fmt("improvement %.1f expected %.1f", got, r.expect));
  }
  if (out.pass) out.detail = "6 averages and 6 relative improvements exact to one decimal";
  return out;
}

Outcome synthetic_identification(const StressRun& run) {
  Outcome out;
  const auto& ev = run.hmm.evaluation;
  if (ev.report.average < 95.0) out.fail(fmt("average %.1f%% < 95%%", ev.report.average));
  for (std::size_t t = 0; t < ev.confusion.size(); ++t) {
    double sum = 0.0;
    for (std::size_t p = 0; p < ev.confusion.size(); ++p) sum += ev.confusion.percent(p, t);
    if (std::abs(sum - 100.0) > 0.5) out.fail(fmt("column %.0f sums to %.3f", t, sum));
  }
  if (run.seconds >= 300.0) out.fail(fmt("took %.1f s", run.seconds));
  if (out.pass) {
    out.detail = fmt("average %.1f%% over %.0f test utterances, %.1f s", ev.report.average,
                     ev.decisions.size(), run.seconds);
  }
  return out;
}

Outcome prosody_sensitivity(const std::filesystem::path& dir) {
  Outcome out;
  const auto manifest = generate_synthetic(SyntheticSpec::prosody_only_preset(), dir);
  const auto rows = alpha_sweep(manifest, paper_split(manifest), std::vector<double>{0.0, 1.0},
                                protocol_config(ModelKind::kHmm));
  const double a0 = rows[0].average_all, a1 = rows[1].average_all;
  if (!(a1 > a0)) out.fail(fmt("alpha=1 %.1f%% vs alpha=0 %.1f%%", a1, a0));
  if (out.pass) out.detail = fmt("alpha=0 %.1f%%, alpha=1 %.1f%%", a0, a1);
  return out;
}

template <class Model>
bool same_after_reload(const Model& model, const std::filesystem::path& file,
                       const std::function<Model(const std::string&)>& parse,
                       const std::function<double(const Model&)>& score) {
  write_text_file(file, model_to_text(model));
  const Model back = parse(read_text_file(file));
  const double a = score(model), b = score(back);
  return back == model && std::memcmp(&a, &b, sizeof a) == 0;
}

Outcome serialization(const StressRun& run, const std::filesystem::path& dir) {
  Outcome out;
  std::mt19937_64 rng(20240707);
  const auto data = oracle::gaussian_sequences(rng, 8, 4, 20, 30);
  const auto pros = oracle::gaussian_sequences(rng, 8, 4, 4, 8);
  const auto& seq = data.front();
  TrainOptions t;
  t.max_iters = 3;
  const auto hmm = train_baum_welch(init_hmm(small_init(6, 3), data), data, t).model;
  const auto chmm2 = train_chmm2(init_chmm2(small_init(6, 3), data), data, t).model;
  SphmmOptions so;
  so.alpha = 0.3;
  const auto sphmm = train_sphmm(hmm, pros, so, t);

  if (!same_after_reload<Hmm1Model>(hmm, dir / "m.hmm", hmm_from_text,
                                    [&](const Hmm1Model& m) { return log_likelihood(m, seq); })) {
    out.fail("hmm model changed");
  }
  if (!same_after_reload<Chmm2Model>(chmm2, dir / "m.chmm2", chmm2_from_text,
                                     [&](const Chmm2Model& m) { return log_likelihood(m, seq); })) {
    out.fail("chmm2 model changed");
  }
  if (!same_after_reload<SphmmModel>(sphmm, dir / "m.sphmm", sphmm_from_text,
                                     [&](const SphmmModel& m) {
                                       return fused_log_likelihood(m, seq, pros.front());
                                     })) {
    out.fail("sphmm model changed");
  }

  // A full bank trained on the synthetic corpus scores its test set identically.
  save_bank(dir / "bank.tcm", run.hmm.bank);
  const auto loaded = load_bank(dir / "bank.tcm");
  if (!(loaded == run.hmm.bank)) out.fail("bank changed");
  const auto test = test_indices(run.manifest, run.split);
  const auto feats = compute_features(run.manifest, std::span(test).first(6), run.hmm.bank.mfcc,
                                      run.hmm.bank.prosody, false, 1);
  for (std::size_t n = 0; n < 6; ++n) {
    const auto a = score_bank(run.hmm.bank, feats[test[n]]);
    const auto b = score_bank(loaded, feats[test[n]]);
    if (std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) != 0) out.fail("bank scores differ");
  }
  if (out.pass) out.detail = "hmm, chmm2, sphmm and a trained bank reload bit-identically";
  return out;
}

}  // namespace

int main() {
  oracle::TempDir dir("acceptance");
  int failures = 0;
  const auto report = [&](int id, const char* name, const std::function<Outcome()>& fn) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o.fail(std::string("exception: ") + e.what());
    }
    if (!o.pass) ++failures;
    std::printf("%s  %2d  %-38s %s\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str());
    std::fflush(stdout);
  };

  report(1, "hmm path-enumeration oracle", hmm_oracle);
  report(2, "chmm2 path-enumeration oracle", chmm2_oracle);
  report(3, "likelihood normalization", normalization);
  report(4, "EM monotonicity", em_monotone);
  report(5, "second-order reduction", reduction);

  StressRun run;
  bool have_run = false;
  try {
    const auto start = Clock::now();
    run.manifest = generate_synthetic(SyntheticSpec::stress_preset(), dir.path() / "stress");
    run.split = paper_split(run.manifest);
    run.hmm = run_protocol(run.manifest, run.split, protocol_config(ModelKind::kHmm));
    run.seconds = seconds_since(start);
    have_run = true;
  } catch (const std::exception& e) {
    std::printf("synthetic stress run failed: %s\n", e.what());
  }
  const auto needs_run = [&](auto fn) {
    return [&, fn]() -> Outcome {
      if (!have_run) return Outcome{false, "synthetic stress run unavailable"};
      return fn(run);
    };
  };

  report(6, "fusion endpoints and alpha=0 sweep", needs_run(sphmm_fusion));
  report(7, "report arithmetic", paper_arithmetic);
  report(8, "synthetic identification", needs_run(synthetic_identification));
  report(9, "prosody sensitivity", [&] { return prosody_sensitivity(dir.path() / "prosody"); });
  report(10, "serialization round trip",
         needs_run([&](const StressRun& r) { return serialization(r, dir.path()); }));

  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
