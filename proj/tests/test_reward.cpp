#include <doctest.h>

#include <filesystem>
#include <random>

#include "adaqr/error.hpp"
#include "adaqr/reward.hpp"

using namespace adaqr;

namespace {

const CandidateKey kKey{"c1", 2, 0};

RetrievalDistribution dist_of(const std::vector<std::pair<std::string, double>>& weights) {
  return RetrievalDistribution{"c1_2_0", weights};
}

std::vector<ScoreRecord> scores_of(const std::vector<std::pair<std::string, double>>& values) {
  std::vector<ScoreRecord> out;
  for (const auto& [pid, lp] : values) out.push_back(ScoreRecord{kKey, pid, lp, "mock"});
  return out;
}

RankedList list_of(const std::vector<std::string>& ids) {
  RankedList list;
  list.query_id = kKey.str();
  for (size_t i = 0; i < ids.size(); i++)
    list.entries.push_back(
        RankedEntry{ids[i], static_cast<double>(ids.size() - i), static_cast<int>(i) + 1});
  return list;
}

}  // namespace

TEST_SUITE("reward") {

TEST_CASE("token_f1 hand cases") {
  CHECK(token_f1("same text", "same text") == doctest::Approx(1.0));
  CHECK(token_f1("Same, TEXT!", "same text") == doctest::Approx(1.0));
  CHECK(token_f1("aaa bbb", "ccc ddd") == 0.0);
  CHECK(token_f1("a b", "a c") == doctest::Approx(0.5));
  CHECK(token_f1("", "anything") == 0.0);
  CHECK(token_f1("anything", "") == 0.0);
}

TEST_CASE("token_f1 respects multiset counts") {
  // overlap of "a a" vs "a": one shared occurrence
  double f1 = token_f1("a a", "a");
  CHECK(f1 == doctest::Approx(2.0 * 1.0 * 0.5 / 1.5));
}

TEST_CASE("token_f1 is symmetric and bounded") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> len(0, 8);
  std::uniform_int_distribution<int> word(0, 5);
  for (int trial = 0; trial < 300; trial++) {
    auto text = [&]() {
      std::string s;
      int n = len(rng);
      for (int i = 0; i < n; i++) s += "w" + std::to_string(word(rng)) + " ";
      return s;
    };
    std::string a = text(), b = text();
    double ab = token_f1(a, b);
    CHECK(ab == token_f1(b, a));
    CHECK(ab >= 0.0);
    CHECK(ab <= 1.0);
  }
}

TEST_CASE("marginal reward hand case") {
  RewardRecord r = marginal_reward(dist_of({{"p1", 0.7311}, {"p2", 0.2689}}),
                                   scores_of({{"p1", -1.0}, {"p2", -3.0}}));
  CHECK(r.value == doctest::Approx(-1.5378).epsilon(1e-4));
  CHECK(r.method == RewardMethod::Marginal);
  CHECK(r.k_used == 2);
  REQUIRE(r.components.size() == 2);
  CHECK(r.components[0].passage_id == "p1");
  CHECK(r.components[0].logprob == -1.0);
}

TEST_CASE("constant scores collapse to the constant") {
  RewardRecord r = marginal_reward(dist_of({{"p1", 0.2}, {"p2", 0.3}, {"p3", 0.5}}),
                                   scores_of({{"p1", -2.5}, {"p2", -2.5}, {"p3", -2.5}}));
  CHECK(r.value == doctest::Approx(-2.5).epsilon(1e-12));
}

TEST_CASE("K=1 reduces to the single logprob") {
  RewardRecord r = marginal_reward(dist_of({{"p1", 1.0}}), scores_of({{"p1", -4.2}}));
  CHECK(r.value == doctest::Approx(-4.2));
  CHECK(r.k_used == 1);
}

TEST_CASE("marginal reward stays within the component range and is linear") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> logprob(-20.0, 0.0);
  std::uniform_real_distribution<double> raw(0.01, 1.0);
  std::uniform_int_distribution<int> len(1, 9);
  for (int trial = 0; trial < 1000; trial++) {
    int k = len(rng);
    std::vector<std::pair<std::string, double>> weights;
    std::vector<std::pair<std::string, double>> values;
    double sum = 0.0;
    for (int i = 0; i < k; i++) {
      weights.emplace_back("p" + std::to_string(i), raw(rng));
      sum += weights.back().second;
    }
    for (auto& [id, w] : weights) w /= sum;
    double lo = 0.0, hi = -1e9;
    for (int i = 0; i < k; i++) {
      double lp = logprob(rng);
      values.emplace_back("p" + std::to_string(i), lp);
      lo = std::min(lo, lp);
      hi = std::max(hi, lp);
    }
    RewardRecord r = marginal_reward(dist_of(weights), scores_of(values));
    CHECK(r.value >= lo - 1e-12);
    CHECK(r.value <= hi + 1e-12);

    // reward(alpha * S + c) == alpha * reward(S) + c
    double alpha = 1.7, c = -0.9;
    std::vector<std::pair<std::string, double>> scaled = values;
    for (auto& [id, lp] : scaled) lp = alpha * lp + c;
    RewardRecord rs = marginal_reward(dist_of(weights), scores_of(scaled));
    CHECK(rs.value == doctest::Approx(alpha * r.value + c).epsilon(1e-9));
  }
}

TEST_CASE("marginal reward rejects misaligned inputs") {
  CHECK_THROWS_AS(marginal_reward(dist_of({{"p1", 1.0}}), scores_of({{"p2", -1.0}})),
                  ValidationError);
  CHECK_THROWS_AS(marginal_reward(dist_of({{"p1", 0.5}, {"p2", 0.5}}),
                                  scores_of({{"p1", -1.0}})),
                  ValidationError);
  CHECK_THROWS_AS(marginal_reward(dist_of({}), scores_of({})), ValidationError);
}

TEST_CASE("concat reward with one passage equals marginal at K=1") {
  MockScorer mock;
  std::string context = "[]\nQuestion: q";
  std::string passage = "alpha beta gamma";
  std::string answer = "alpha beta";
  RewardRecord concat = concat_reward(mock, kKey, context, {passage}, answer);
  RewardRecord marginal = marginal_reward(
      dist_of({{"p1", 1.0}}),
      scores_of({{"p1", mock.score(ScoringRequest{context, passage, answer})}}));
  CHECK(concat.value == doctest::Approx(marginal.value).epsilon(1e-12));
  CHECK(concat.method == RewardMethod::Concat);
}

TEST_CASE("concat reward scores the blank-line joined text") {
  MockScorer mock;
  std::string context = "[]\nQuestion: q";
  RewardRecord r = concat_reward(mock, kKey, context, {"alpha beta", "gamma delta"}, "gamma");
  double direct = mock.score(ScoringRequest{context, "alpha beta\n\ngamma delta", "gamma"});
  CHECK(r.value == doctest::Approx(direct).epsilon(1e-12));
  CHECK(r.k_used == 2);
  CHECK_THROWS_AS(concat_reward(mock, kKey, context, {}, "a"), ValidationError);
}

TEST_CASE("gold rank reward is the reciprocal best gold rank") {
  RankedList list = list_of({"p1", "p2", "p3", "p4"});
  CHECK(gold_rank_reward(kKey, list, {"p1"}).value == doctest::Approx(1.0));
  CHECK(gold_rank_reward(kKey, list, {"p3"}).value == doctest::Approx(1.0 / 3.0).epsilon(1e-9));
  CHECK(gold_rank_reward(kKey, list, {"p3", "p2"}).value == doctest::Approx(0.5));
  CHECK(gold_rank_reward(kKey, list, {"absent"}).value == 0.0);
  CHECK_THROWS_AS(gold_rank_reward(kKey, list, {}), ValidationError);
}

TEST_CASE("pseudo label picks the max-F1 passage, reciprocal rank value") {
  PassageCorpus corpus;
  corpus.passages = {{"p1", "unrelated words"},
                     {"p2", "exact answer text"},
                     {"p3", "answer only"}};
  RankedList list = list_of({"p1", "p2", "p3"});
  RewardRecord r = pseudo_label_reward(kKey, list, corpus, "exact answer text");
  CHECK(r.value == doctest::Approx(0.5));  // p2 at rank 2
  REQUIRE(r.components.size() == 1);
  CHECK(r.components[0].passage_id == "p2");
  CHECK(r.components[0].weight == doctest::Approx(1.0));
}

TEST_CASE("pseudo label ties break toward the lower passage id") {
  PassageCorpus corpus;
  corpus.passages = {{"pa", "zero overlap"}, {"pb", "also nothing"}, {"pc", "still nothing"}};
  RankedList list = list_of({"pc", "pb", "pa"});  // pa ranked last
  RewardRecord r = pseudo_label_reward(kKey, list, corpus, "answer words");
  CHECK(r.components[0].passage_id == "pa");  // all F1 = 0, lowest id wins
  CHECK(r.value == doctest::Approx(1.0 / 3.0));

  corpus.passages = {{"pa", "answer words"}, {"pb", "answer words"}};
  list = list_of({"pb", "pa"});
  r = pseudo_label_reward(kKey, list, corpus, "answer words");
  CHECK(r.components[0].passage_id == "pa");
  CHECK(r.value == doctest::Approx(0.5));
}

TEST_CASE("pseudo label honors the depth limit") {
  PassageCorpus corpus;
  corpus.passages = {{"p1", "nothing here"}, {"p2", "answer text"}};
  RankedList list = list_of({"p1", "p2"});
  RewardRecord shallow = pseudo_label_reward(kKey, list, corpus, "answer text", 1);
  CHECK(shallow.components[0].passage_id == "p1");  // p2 out of reach
  RewardRecord deep = pseudo_label_reward(kKey, list, corpus, "answer text", 2);
  CHECK(deep.components[0].passage_id == "p2");
  CHECK_THROWS_AS(pseudo_label_reward(kKey, RankedList{"q", {}}, corpus, "a"), ValidationError);
}

TEST_CASE("pseudo label ignores permutations below the selected rank") {
  PassageCorpus corpus;
  for (int i = 0; i < 8; i++)
    corpus.passages["p" + std::to_string(i)] = "filler " + std::to_string(i);
  corpus.passages["p2"] = "the answer";
  RankedList a = list_of({"p0", "p1", "p2", "p3", "p4", "p5"});
  RankedList b = list_of({"p0", "p1", "p2", "p5", "p3", "p4"});
  RewardRecord ra = pseudo_label_reward(kKey, a, corpus, "the answer");
  RewardRecord rb = pseudo_label_reward(kKey, b, corpus, "the answer");
  CHECK(ra.value == rb.value);
  CHECK(ra.components[0].passage_id == rb.components[0].passage_id);
}

TEST_CASE("reward dump round-trips") {
  std::vector<RewardRecord> rewards;
  RewardRecord r = marginal_reward(dist_of({{"p1", 0.6}, {"p2", 0.4}}),
                                   scores_of({{"p1", -1.0}, {"p2", -2.0}}));
  rewards.push_back(r);
  auto path = std::filesystem::temp_directory_path() / "adaqr_rewards.jsonl";
  save_rewards(rewards, path);
  std::vector<RewardRecord> loaded = load_rewards(path);
  REQUIRE(loaded.size() == 1);
  CHECK(loaded[0].key == r.key);
  CHECK(loaded[0].method == r.method);
  CHECK(loaded[0].value == r.value);
  CHECK(loaded[0].k_used == r.k_used);
  REQUIRE(loaded[0].components.size() == 2);
  CHECK(loaded[0].components[1].weight == r.components[1].weight);
}

}  // TEST_SUITE
