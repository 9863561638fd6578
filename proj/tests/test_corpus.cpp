#include <fstream>

#include "doctest.h"
#include "oracles.hpp"
#include "talkcond/corpus.hpp"
#include "talkcond/error.hpp"
#include "talkcond/wav.hpp"

using namespace talkcond;

namespace {

// Full-size in-memory manifest (no audio on disk).
CorpusManifest grid(int speakers, int sentences, int reps, const ConditionSet& set) {
  CorpusManifest m;
  m.condition_set = set;
  for (int s = 1; s <= speakers; ++s) {
    char id[8];
    std::snprintf(id, sizeof id, "s%02d", s);
    for (int sen = 1; sen <= sentences; ++sen)
      for (const auto& c : set.labels)
        for (int r = 1; r <= reps; ++r)
          m.utterances.push_back({"x.wav", id, s % 2 ? Gender::kMale : Gender::kFemale, sen, c, r});
  }
  return m;
}

}  // namespace

TEST_CASE("condition sets") {
  CHECK(ConditionSet::stress().labels ==
        std::vector<std::string>{"neutral", "shouted", "slow", "loud", "soft", "fast"});
  CHECK(ConditionSet::emotion().labels ==
        std::vector<std::string>{"neutral", "angry", "sad", "happy", "disgust", "fear"});
  CHECK(ConditionSet::stress().index_of("loud") == 3u);
  CHECK_FALSE(ConditionSet::stress().index_of("calm").has_value());
  CHECK_THROWS_AS((ConditionSet{"x", {"a", "a"}}.validate()), CorpusError);
  CHECK_THROWS_AS((ConditionSet{"x", {}}.validate()), CorpusError);
}

TEST_CASE("paper-shaped split counts") {
  const auto m = grid(30, 8, 9, ConditionSet::stress());
  CHECK(m.utterances.size() == 12960);
  const auto split = paper_split(m);
  CHECK(split.train_speakers.size() == 20);
  CHECK(split.test_speakers.size() == 10);
  CHECK(split.train_sentences == std::set<int>{1, 2, 3, 4});
  const auto train = train_indices(m, split);
  const auto test = test_indices(m, split);
  std::size_t neutral_train = 0;
  for (auto i : train) neutral_train += m.utterances[i].condition == "neutral";
  CHECK(neutral_train == 720);
  CHECK(test.size() == 2160);
  for (auto i : train) CHECK_FALSE(split.is_test(m.utterances[i]));
}

TEST_CASE("small corpora keep one speaker and sentence on the test side") {
  const auto m = grid(2, 2, 1, ConditionSet{"two", {"a", "b"}});
  const auto split = paper_split(m);
  CHECK(split.train_speakers.size() == 1);
  CHECK(split.test_speakers.size() == 1);
  CHECK(split.train_sentences.size() == 1);
  CHECK_THROWS_AS(paper_split(grid(1, 2, 1, ConditionSet::stress())), CorpusError);
}

TEST_CASE("sentence ids sort numerically") {
  const auto m = grid(3, 10, 1, ConditionSet{"two", {"a", "b"}});
  CHECK(paper_split(m).train_sentences == std::set<int>{1, 2, 3, 4, 5});
}

TEST_CASE("overlapping split sides are rejected") {
  SplitSpec s{{"a"}, {"a"}, {1}, {2}};
  CHECK_THROWS_AS(s.validate(), CorpusError);
}

TEST_CASE("manifest round trip and validation") {
  oracle::TempDir dir("manifest");
  CorpusManifest m = grid(2, 2, 1, ConditionSet::stress());
  for (auto& u : m.utterances) {
    u.audio_path = dir.path() / "wav" /
                   (u.speaker_id + "_" + std::to_string(u.sentence_id) + "_" + u.condition + ".wav");
  }
  std::filesystem::create_directories(dir.path() / "wav");
  for (const auto& u : m.utterances) write_wav(u.audio_path, {16000, std::vector<std::int16_t>(400, 0)});
  save_manifest(m, dir.path() / "manifest.tsv");
  const auto back = load_manifest(dir.path() / "manifest.tsv");
  CHECK(back == m);

  std::ifstream in(dir.path() / "manifest.tsv");
  std::string first;
  std::getline(in, first);
  CHECK(first == "#talkcond-manifest v1");

  std::filesystem::remove(m.utterances[0].audio_path);
  CHECK_THROWS_AS(load_manifest(dir.path() / "manifest.tsv"), CorpusError);
  CHECK_NOTHROW(load_manifest(dir.path() / "manifest.tsv", {false}));

  CorpusManifest dup = m;
  dup.utterances.push_back(dup.utterances[0]);
  CHECK_THROWS_AS(validate_manifest(dup), CorpusError);
  CorpusManifest bad_label = m;
  bad_label.utterances[0].condition = "calm";
  CHECK_THROWS_AS(validate_manifest(bad_label), CorpusError);
}

TEST_CASE("wav round trip and rejection of other formats") {
  oracle::TempDir dir("wav");
  PcmAudio a{16000, {0, 1, -1, 32767, -32768, 1234}};
  write_wav(dir.path() / "a.wav", a);
  const auto b = read_wav(dir.path() / "a.wav");
  CHECK(b.sample_rate_hz == 16000);
  CHECK(b.samples == a.samples);
  CHECK(to_double(b.samples)[3] == doctest::Approx(32767.0 / 32768.0));
  std::ofstream(dir.path() / "junk.wav") << "RIFFxxxxWAVEjunk";
  CHECK_THROWS_AS(read_wav(dir.path() / "junk.wav"), CorpusError);
  CHECK_THROWS_AS(read_wav(dir.path() / "missing.wav"), CorpusError);
}

TEST_CASE("synthetic clips are deterministic and distinct") {
  const auto spec = SyntheticSpec::stress_preset();
  const auto a = synthesize_clip(spec, 0, 0, 1, 1);
  CHECK(a == synthesize_clip(spec, 0, 0, 1, 1));
  CHECK(a != synthesize_clip(spec, 0, 0, 1, 2));
  CHECK(a != synthesize_clip(spec, 1, 0, 1, 1));
  auto other_seed = spec;
  other_seed.seed = 8;
  CHECK(a != synthesize_clip(other_seed, 0, 0, 1, 1));
  // Slow speech lasts longer than fast speech for the same text.
  CHECK(synthesize_clip(spec, 2, 0, 1, 1).size() > synthesize_clip(spec, 5, 0, 1, 1).size());
}

TEST_CASE("synthetic corpus on disk") {
  oracle::TempDir dir("synth");
  auto spec = SyntheticSpec::emotion_preset();
  spec.speakers = 2;
  spec.sentences = 2;
  spec.repetitions = 1;
  const auto m = generate_synthetic(spec, dir.path());
  CHECK(m.utterances.size() == 2 * 2 * 6);
  CHECK(m.condition_set == ConditionSet::emotion());
  CHECK(load_manifest(dir.path() / "manifest.tsv") == m);
  CHECK(m.utterances[0].gender == Gender::kMale);
  CHECK(SyntheticSpec::paper_shaped(spec).speakers * 8 * 9 * 6 == 12960);
  CHECK_THROWS_AS(generate_synthetic(spec, "/proc/talkcond-no-such-dir"), CorpusError);
}
