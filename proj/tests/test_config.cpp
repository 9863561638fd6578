#include <fstream>

#include "doctest.h"
#include "oracles.hpp"
#include "run_config.hpp"
#include "talkcond/error.hpp"

using namespace talkcond;

TEST_CASE("defaults, file values and resolution") {
  oracle::TempDir dir("config");
  {
    std::ofstream out(dir.path() / "run.ini");
    out << "[corpus]\nmanifest = data/manifest.tsv\n"
           "[model]\nkind = sphmm\nstates = 6\nalpha = 0.25\n"
           "[train]\nmax_iters = 7\nworkers = 3\n"
           "[mfcc]\nn_mel_filters = 26\n";
  }
  const auto defaults = cli::default_config();
  CHECK(defaults.protocol.n_states == 9);
  CHECK(defaults.protocol.n_mix == 10);
  CHECK(defaults.protocol.sphmm.grouping == 3);
  CHECK(defaults.protocol.sphmm.alpha == 0.5);
  const auto cfg = cli::load_config(dir.path() / "run.ini", defaults);
  CHECK(cfg.manifest == dir.path() / "data/manifest.tsv");
  CHECK(cfg.protocol.kind == ModelKind::kSphmm);
  CHECK(cfg.protocol.n_states == 6);
  CHECK(cfg.protocol.n_mix == 10);
  CHECK(cfg.protocol.sphmm.alpha == 0.25);
  CHECK(cfg.protocol.train.max_iters == 7);
  CHECK(cfg.protocol.workers == 3);
  CHECK(cfg.protocol.mfcc.n_mel_filters == 26);
  CHECK_NOTHROW(cli::validate_config(cfg));

  // The effective config reloads to the same values.
  {
    std::ofstream out(dir.path() / "effective.ini");
    out << cli::config_to_ini(cfg);
  }
  const auto again = cli::load_config(dir.path() / "effective.ini", defaults);
  CHECK(cli::config_to_ini(again) == cli::config_to_ini(cfg));
}

TEST_CASE("bad configuration files") {
  oracle::TempDir dir("badcfg");
  const auto write = [&](const std::string& text) {
    std::ofstream(dir.path() / "c.ini") << text;
    return dir.path() / "c.ini";
  };
  CHECK_THROWS_AS(cli::load_config(write("[model]\ncolour = red\n"), cli::default_config()), Error);
  CHECK_THROWS_AS(cli::load_config(write("[model]\nstates = nine\n"), cli::default_config()), Error);
  CHECK_THROWS_AS(cli::load_config(write("[model]\nkind = lstm\n"), cli::default_config()), Error);
  auto cfg = cli::load_config(write("[model]\nkind = sphmm\nstates = 8\n"), cli::default_config());
  CHECK_THROWS_AS(cli::validate_config(cfg), Error);
  cfg = cli::load_config(write("[model]\nalpha = 1.5\n"), cli::default_config());
  CHECK_THROWS_AS(cli::validate_config(cfg), Error);
}

TEST_CASE("explicit split from lists") {
  cli::SplitConfig s;
  s.mode = "explicit";
  s.train_speakers = cli::split_list("s01, s02");
  s.test_speakers = {"s03"};
  s.train_sentences = {1, 2};
  s.test_sentences = {3};
  const auto spec = cli::resolve_split(s, {});
  CHECK(spec.train_speakers == std::set<std::string>{"s01", "s02"});
  s.test_speakers = {"s02"};
  CHECK_THROWS_AS(cli::resolve_split(s, {}), CorpusError);
}
