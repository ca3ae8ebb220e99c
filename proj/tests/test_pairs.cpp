#include <doctest.h>

#include <filesystem>
#include <random>
#include <set>

#include "adaqr/error.hpp"
#include "adaqr/io.hpp"
#include "adaqr/pairs.hpp"

using namespace adaqr;

namespace {

std::vector<RewardRecord> rewards_of(const std::vector<double>& values) {
  std::vector<RewardRecord> out;
  for (size_t i = 0; i < values.size(); i++) {
    RewardRecord r;
    r.key = CandidateKey{"c1", 2, static_cast<int>(i)};
    r.method = RewardMethod::Marginal;
    r.value = values[i];
    r.k_used = 1;
    out.push_back(r);
  }
  return out;
}

std::vector<std::string> candidates_of(size_t n) {
  std::vector<std::string> out;
  for (size_t i = 0; i < n; i++) out.push_back("rewrite " + std::to_string(i));
  return out;
}

// Independent enumeration of the gap rule for cross-checking build_pairs.
std::vector<std::pair<int, int>> enumerate_pairs(const std::vector<double>& values,
                                                 const std::vector<std::string>& texts,
                                                 double delta) {
  std::vector<std::pair<int, int>> out;
  for (size_t w = 0; w < values.size(); w++)
    for (size_t l = 0; l < values.size(); l++)
      if (w != l && values[w] - values[l] > delta && texts[w] != texts[l])
        out.emplace_back(static_cast<int>(w), static_cast<int>(l));
  return out;
}

}  // namespace

TEST_SUITE("pairs") {

TEST_CASE("worked example emits exactly the two qualifying pairs") {
  std::vector<std::string> cands = candidates_of(3);
  std::vector<PreferencePair> pairs =
      build_pairs("prompt", cands, rewards_of({-1.0, -1.05, -2.0}), 0.1, PairMode::All);
  REQUIRE(pairs.size() == 2);
  CHECK(pairs[0].chosen == "rewrite 0");
  CHECK(pairs[0].rejected == "rewrite 2");
  CHECK(pairs[0].gap == doctest::Approx(1.0));
  CHECK(pairs[1].chosen == "rewrite 1");
  CHECK(pairs[1].rejected == "rewrite 2");
  CHECK(pairs[1].gap == doctest::Approx(0.95));
}

TEST_CASE("max-gap mode keeps only the widest pair") {
  std::vector<PreferencePair> pairs = build_pairs(
      "prompt", candidates_of(3), rewards_of({-1.0, -1.05, -2.0}), 0.1, PairMode::MaxGap);
  REQUIRE(pairs.size() == 1);
  CHECK(pairs[0].chosen == "rewrite 0");
  CHECK(pairs[0].rejected == "rewrite 2");
  CHECK(pairs[0].gap == doctest::Approx(1.0));
}

TEST_CASE("equal rewards produce nothing") {
  CHECK(build_pairs("p", candidates_of(3), rewards_of({-1.0, -1.0, -1.0}), 0.1, PairMode::All)
            .empty());
}

TEST_CASE("fewer than two candidates produce nothing") {
  CHECK(build_pairs("p", candidates_of(1), rewards_of({-1.0}), 0.1, PairMode::All).empty());
  CHECK(build_pairs("p", candidates_of(0), {}, 0.1, PairMode::All).empty());
}

TEST_CASE("identical candidate texts never pair") {
  std::vector<std::string> cands = {"same text", "same text", "other"};
  std::vector<PreferencePair> pairs =
      build_pairs("p", cands, rewards_of({-1.0, -3.0, -5.0}), 0.1, PairMode::All);
  // (0,1) would qualify on rewards alone but carries no signal
  for (const PreferencePair& pair : pairs) CHECK(pair.chosen != pair.rejected);
  REQUIRE(pairs.size() == 2);
  CHECK(pairs[0].rejected == "other");
  CHECK(pairs[1].rejected == "other");

  std::vector<PreferencePair> max_gap =
      build_pairs("p", cands, rewards_of({-1.0, -3.0, -5.0}), 0.1, PairMode::MaxGap);
  REQUIRE(max_gap.size() == 1);
  CHECK(max_gap[0].chosen == "same text");
  CHECK(max_gap[0].rejected == "other");
}

TEST_CASE("matches the brute-force enumeration on random triples") {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> reward(-3.0, 0.0);
  std::uniform_int_distribution<int> text_pool(0, 3);  // collisions on purpose
  for (int trial = 0; trial < 1000; trial++) {
    std::vector<double> values = {reward(rng), reward(rng), reward(rng)};
    std::vector<std::string> texts;
    for (int i = 0; i < 3; i++) texts.push_back("t" + std::to_string(text_pool(rng)));
    std::vector<PreferencePair> got =
        build_pairs("p", texts, rewards_of(values), 0.1, PairMode::All);
    std::vector<std::pair<int, int>> want = enumerate_pairs(values, texts, 0.1);
    REQUIRE(got.size() == want.size());
    CHECK(got.size() <= 3);
    for (size_t i = 0; i < got.size(); i++) {
      CHECK(got[i].chosen_key.candidate_index == want[i].first);
      CHECK(got[i].rejected_key.candidate_index == want[i].second);
      CHECK(got[i].gap > 0.1);
      CHECK(got[i].gap ==
            doctest::Approx(got[i].reward_chosen - got[i].reward_rejected).epsilon(1e-15));
    }
    // antisymmetry
    std::set<std::pair<int, int>> seen(want.begin(), want.end());
    for (const auto& [w, l] : want) CHECK(seen.count({l, w}) == 0);
    // max-gap emits at most one, and it is a maximal-gap element
    std::vector<PreferencePair> best =
        build_pairs("p", texts, rewards_of(values), 0.1, PairMode::MaxGap);
    CHECK(best.size() <= 1);
    if (!best.empty()) {
      for (const auto& [w, l] : want)
        CHECK(best[0].gap >= values[static_cast<size_t>(w)] - values[static_cast<size_t>(l)]);
    } else {
      CHECK(want.empty());
    }
  }
}

TEST_CASE("export writes the five-field records and round-trips") {
  std::vector<PreferencePair> pairs =
      build_pairs("the prompt", candidates_of(3), rewards_of({-1.0, -1.05, -2.0}), 0.1,
                  PairMode::All);
  auto path = std::filesystem::temp_directory_path() / "adaqr_dpo.jsonl";
  CHECK(export_dpo_dataset(pairs, path) == 2);
  std::vector<PreferencePair> loaded = load_dpo_dataset(path);
  REQUIRE(loaded.size() == 2);
  CHECK(loaded[0].prompt == "the prompt");
  CHECK(loaded[0].chosen == pairs[0].chosen);
  CHECK(loaded[0].rejected == pairs[0].rejected);
  CHECK(loaded[0].reward_chosen == pairs[0].reward_chosen);
  CHECK(loaded[0].gap == doctest::Approx(pairs[0].gap));

  // byte-stable across two writes
  std::string first = io::read_file(path);
  export_dpo_dataset(pairs, path);
  CHECK(io::read_file(path) == first);

  CHECK(export_dpo_dataset({}, path) == 0);
  CHECK(io::read_file(path).empty());
}

TEST_CASE("subset_pairs samples deterministically without replacement") {
  std::vector<PreferencePair> pairs;
  for (int i = 0; i < 100; i++) {
    PreferencePair p;
    p.prompt = "p" + std::to_string(i);
    p.chosen = "w";
    p.rejected = "l";
    p.gap = 1.0;
    pairs.push_back(p);
  }
  std::vector<PreferencePair> all = subset_pairs(pairs, 1.0, 9);
  REQUIRE(all.size() == pairs.size());
  for (size_t i = 0; i < all.size(); i++) CHECK(all[i].prompt == pairs[i].prompt);

  std::vector<PreferencePair> fifth = subset_pairs(pairs, 0.2, 9);
  CHECK(fifth.size() == 20);
  std::set<std::string> prompts;
  for (const auto& p : fifth) prompts.insert(p.prompt);
  CHECK(prompts.size() == 20);  // without replacement

  std::vector<PreferencePair> again = subset_pairs(pairs, 0.2, 9);
  REQUIRE(again.size() == fifth.size());
  for (size_t i = 0; i < again.size(); i++) CHECK(again[i].prompt == fifth[i].prompt);

  std::vector<PreferencePair> other = subset_pairs(pairs, 0.2, 10);
  bool differs = false;
  for (size_t i = 0; i < other.size(); i++)
    if (other[i].prompt != fifth[i].prompt) differs = true;
  CHECK(differs);

  CHECK(subset_pairs(pairs, 0.004, 1).size() == 1);  // ceil rounds up
  CHECK_THROWS_AS(subset_pairs(pairs, 0.0, 1), ValidationError);
  CHECK_THROWS_AS(subset_pairs(pairs, 1.5, 1), ValidationError);
}

TEST_CASE("delta must be non-negative and rewards single-instance") {
  CHECK_THROWS_AS(
      build_pairs("p", candidates_of(2), rewards_of({-1.0, -2.0}), -0.1, PairMode::All),
      ValidationError);
  std::vector<RewardRecord> mixed = rewards_of({-1.0, -2.0});
  mixed[1].key.conversation_id = "c2";
  CHECK_THROWS_AS(build_pairs("p", candidates_of(2), mixed, 0.1, PairMode::All),
                  ValidationError);
}

}  // TEST_SUITE
