#include <doctest.h>

#include <filesystem>
#include <random>

#include "adaqr/error.hpp"
#include "adaqr/eval.hpp"
#include "support/oracles.hpp"

using namespace adaqr;

namespace {

RankedList run_list(const std::string& qid, const std::vector<std::string>& ids) {
  RankedList list;
  list.query_id = qid;
  for (size_t i = 0; i < ids.size(); i++)
    list.entries.push_back(
        RankedEntry{ids[i], static_cast<double>(ids.size() - i), static_cast<int>(i) + 1});
  return list;
}

Qrels qrels_of(const std::string& qid, const std::vector<std::string>& golds) {
  Qrels qrels;
  for (const auto& g : golds) qrels.grades[qid][g] = 1;
  return qrels;
}

}  // namespace

TEST_SUITE("eval") {

TEST_CASE("perfect single-query run") {
  MetricReport report = evaluate_run({run_list("q1", {"gold", "x", "y"})},
                                     qrels_of("q1", {"gold"}), {{1, 5}, 3});
  CHECK(report.mean.mrr == doctest::Approx(1.0));
  CHECK(report.mean.map == doctest::Approx(1.0));
  CHECK(report.mean.ndcg == doctest::Approx(1.0));
  CHECK(report.mean.recall.at(1) == doctest::Approx(1.0));
  CHECK(report.query_count == 1);
}

TEST_CASE("gold at rank 2 of 3: hand NDCG") {
  MetricReport report = evaluate_run({run_list("q1", {"x", "gold", "y"})},
                                     qrels_of("q1", {"gold"}), {{1, 5}, 3});
  CHECK(report.mean.ndcg == doctest::Approx(0.6309).epsilon(1e-4));
  CHECK(report.mean.mrr == doctest::Approx(0.5));
}

TEST_CASE("golds at ranks 1 and 3: hand MAP") {
  MetricReport report = evaluate_run({run_list("q1", {"g1", "x", "g2", "y"})},
                                     qrels_of("q1", {"g1", "g2"}), {{1, 5}, 3});
  CHECK(report.mean.map == doctest::Approx(0.8333).epsilon(1e-4));
  CHECK(report.mean.mrr == doctest::Approx(1.0));
  CHECK(report.mean.recall.at(5) == doctest::Approx(1.0));
  CHECK(report.mean.recall.at(1) == doctest::Approx(0.5));
}

TEST_CASE("qrels query missing from the run scores zero") {
  Qrels qrels = qrels_of("q1", {"gold"});
  qrels.grades["q2"]["other"] = 1;
  MetricReport report =
      evaluate_run({run_list("q1", {"gold"})}, qrels, {{1, 5}, 3});
  CHECK(report.query_count == 2);
  CHECK(report.per_query.at("q2").mrr == 0.0);
  CHECK(report.per_query.at("q2").map == 0.0);
  CHECK(report.mean.mrr == doctest::Approx(0.5));
}

TEST_CASE("run queries without judgments are ignored") {
  MetricReport report = evaluate_run({run_list("q1", {"gold"}), run_list("phantom", {"x"})},
                                     qrels_of("q1", {"gold"}), {{1, 5}, 3});
  CHECK(report.query_count == 1);
  CHECK(report.per_query.count("phantom") == 0);
}

TEST_CASE("empty qrels are rejected") {
  CHECK_THROWS_AS(evaluate_run({run_list("q1", {"x"})}, Qrels{}, {{1, 5}, 3}),
                  ValidationError);
  Qrels all_zero;
  all_zero.grades["q1"]["x"] = 0;
  CHECK_THROWS_AS(evaluate_run({run_list("q1", {"x"})}, all_zero, {{1, 5}, 3}),
                  ValidationError);
}

TEST_CASE("entries below the deepest cutoff never matter") {
  std::vector<std::string> ids;
  for (int i = 0; i < 20; i++) ids.push_back("d" + std::to_string(i));
  Qrels qrels = qrels_of("q1", {"d2", "d15"});  // d15 sits below the cutoff

  std::vector<std::string> permuted = ids;
  std::swap(permuted[12], permuted[19]);
  std::swap(permuted[15], permuted[13]);

  EvalOptions options{{1, 5, 10}, 3};
  MetricReport a = evaluate_run({run_list("q1", ids)}, qrels, options);
  MetricReport b = evaluate_run({run_list("q1", permuted)}, qrels, options);
  CHECK(a.mean.mrr == b.mean.mrr);
  CHECK(a.mean.map == b.mean.map);
  CHECK(a.mean.ndcg == b.mean.ndcg);
  for (int k : options.ks) CHECK(a.mean.recall.at(k) == b.mean.recall.at(k));
}

TEST_CASE("an irrelevant tail document changes no metric") {
  Qrels qrels = qrels_of("q1", {"d1"});
  std::vector<std::string> base = {"d0", "d1", "d2"};
  std::vector<std::string> longer = base;
  longer.push_back("junk");
  EvalOptions options{{1, 5}, 3};
  MetricReport a = evaluate_run({run_list("q1", base)}, qrels, options);
  MetricReport b = evaluate_run({run_list("q1", longer)}, qrels, options);
  CHECK(a.mean.mrr == b.mean.mrr);
  CHECK(a.mean.map == b.mean.map);
  CHECK(a.mean.ndcg == b.mean.ndcg);
  for (int k : options.ks) CHECK(a.mean.recall.at(k) == b.mean.recall.at(k));
}

TEST_CASE("with a single relevant passage MRR equals MAP") {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 50; trial++) {
    std::vector<std::string> ids;
    for (int i = 0; i < 10; i++) ids.push_back("d" + std::to_string(i));
    std::shuffle(ids.begin(), ids.end(), rng);
    Qrels qrels = qrels_of("q1", {"d4"});
    MetricReport report = evaluate_run({run_list("q1", ids)}, qrels, {{1, 5, 10}, 3});
    CHECK(report.mean.mrr == report.mean.map);
  }
}

TEST_CASE("recall is non-decreasing in k") {
  MetricReport report = evaluate_run({run_list("q1", {"x", "g1", "y", "g2", "z"})},
                                     qrels_of("q1", {"g1", "g2"}), {{1, 2, 3, 4, 5}, 3});
  double previous = -1.0;
  for (int k : report.ks) {
    CHECK(report.mean.recall.at(k) >= previous);
    previous = report.mean.recall.at(k);
  }
}

TEST_CASE("matches the brute-force reference on randomized runs") {
  std::mt19937_64 rng(4242);
  std::uniform_int_distribution<int> n_queries(1, 20);
  std::uniform_int_distribution<int> n_docs(1, 50);
  std::uniform_int_distribution<int> grade(0, 3);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  EvalOptions options{{1, 5, 10}, 3};
  size_t depth = 10;

  for (int trial = 0; trial < 60; trial++) {
    int nq = n_queries(rng);
    std::vector<RankedList> run;
    Qrels qrels;
    std::vector<std::vector<std::string>> rankings;
    for (int q = 0; q < nq; q++) {
      std::string qid = "q" + std::to_string(q);
      std::vector<std::string> ids;
      int nd = n_docs(rng);
      for (int d = 0; d < nd; d++) ids.push_back("d" + std::to_string(d));
      std::shuffle(ids.begin(), ids.end(), rng);
      for (const auto& id : ids)
        if (coin(rng) < 0.2) qrels.grades[qid][id] = grade(rng);
      if (coin(rng) < 0.9) {  // sometimes the query is missing from the run
        run.push_back(run_list(qid, ids));
        rankings.push_back(ids);
      } else {
        rankings.push_back({});
      }
    }
    bool any_positive = false;
    for (const auto& [qid, docs] : qrels.grades)
      for (const auto& [pid, g] : docs)
        if (g > 0) any_positive = true;
    if (!any_positive) continue;

    MetricReport got = evaluate_run(run, qrels, options);
    for (int q = 0; q < nq; q++) {
      std::string qid = "q" + std::to_string(q);
      auto jt = qrels.grades.find(qid);
      if (jt == qrels.grades.end()) continue;
      bool positive = false;
      for (const auto& [pid, g] : jt->second)
        if (g > 0) positive = true;
      if (!positive) {
        CHECK(got.per_query.count(qid) == 0);
        continue;
      }
      oracles::ReferenceMetrics want = oracles::metrics_scan(
          rankings[static_cast<size_t>(q)], jt->second, options.ks, options.ndcg_cutoff, depth);
      const QueryMetrics& m = got.per_query.at(qid);
      CHECK(m.mrr == doctest::Approx(want.mrr).epsilon(1e-9));
      CHECK(m.map == doctest::Approx(want.map).epsilon(1e-9));
      CHECK(m.ndcg == doctest::Approx(want.ndcg).epsilon(1e-9));
      for (int k : options.ks)
        CHECK(m.recall.at(k) == doctest::Approx(want.recall.at(k)).epsilon(1e-9));
    }
  }
}

TEST_CASE("topic shift split classifies turns") {
  ConversationSet set;
  Conversation same;
  same.conversation_id = "c1";
  same.turns.push_back(Turn{1, "q", "a", std::nullopt, std::vector<std::string>{"p1"}});
  same.turns.push_back(Turn{2, "q", "a", std::nullopt, std::vector<std::string>{"p1"}});
  set.add(same);
  Conversation moved;
  moved.conversation_id = "c2";
  moved.turns.push_back(Turn{1, "q", "a", std::nullopt, std::vector<std::string>{"p1"}});
  moved.turns.push_back(Turn{2, "q", "a", std::nullopt, std::vector<std::string>{"p2"}});
  set.add(moved);
  Conversation unlabeled;
  unlabeled.conversation_id = "c3";
  unlabeled.turns.push_back(Turn{1, "q", "a", std::nullopt, std::nullopt});
  set.add(unlabeled);

  TopicShiftSplit split = topic_shift_split(set, Qrels{});
  CHECK(split.initial.size() == 2);
  REQUIRE(split.concentrated.size() == 1);
  CHECK(split.concentrated[0] == TurnKey{"c1", 2});
  REQUIRE(split.shift.size() == 1);
  CHECK(split.shift[0] == TurnKey{"c2", 2});
  CHECK(split.excluded == 1);
}

TEST_CASE("topic shift split falls back to qrels positives") {
  ConversationSet set;
  Conversation conv;
  conv.conversation_id = "c1";
  conv.turns.push_back(Turn{1, "q", "a", std::nullopt, std::nullopt});
  conv.turns.push_back(Turn{2, "q", "a", std::nullopt, std::nullopt});
  set.add(conv);
  Qrels qrels;
  qrels.grades["c1_1"]["p1"] = 1;
  qrels.grades["c1_2"]["p1"] = 1;
  TopicShiftSplit split = topic_shift_split(set, qrels);
  CHECK(split.initial.size() == 1);
  CHECK(split.concentrated.size() == 1);
  CHECK(split.excluded == 0);
}

TEST_CASE("answer-passage F1 profile on a constructed set") {
  PassageCorpus corpus;
  corpus.passages = {{"p1", "alpha beta"}, {"p2", "gamma delta"}};
  ConversationSet set;
  Conversation conv;
  conv.conversation_id = "c1";
  // answer identical to its gold passage, then a disjoint one
  conv.turns.push_back(Turn{1, "q", "alpha beta", std::nullopt, std::vector<std::string>{"p1"}});
  conv.turns.push_back(Turn{2, "q", "nothing shared", std::nullopt,
                            std::vector<std::string>{"p2"}});
  set.add(conv);
  F1Profile profile = answer_passage_f1_profile(set, Qrels{}, corpus);
  CHECK(profile.evaluated == 2);
  CHECK(profile.mean == doctest::Approx(0.5));
  CHECK(profile.skipped == 0);

  // unresolvable gold ids are skipped with a count
  Conversation missing;
  missing.conversation_id = "c2";
  missing.turns.push_back(Turn{1, "q", "alpha", std::nullopt,
                               std::vector<std::string>{"p404"}});
  set.add(missing);
  F1Profile with_skip = answer_passage_f1_profile(set, Qrels{}, corpus);
  CHECK(with_skip.evaluated == 2);
  CHECK(with_skip.skipped == 1);
}

TEST_CASE("qrels files round-trip") {
  Qrels qrels;
  qrels.grades["q1"]["p1"] = 1;
  qrels.grades["q1"]["p2"] = 0;
  qrels.grades["q2"]["p3"] = 2;
  auto path = std::filesystem::temp_directory_path() / "adaqr_qrels.trec";
  save_qrels(qrels, path);
  Qrels loaded = load_qrels(path);
  CHECK(loaded.grades == qrels.grades);
  CHECK(loaded.positives("q1") == std::set<std::string>{"p1"});
}

TEST_CASE("metric table renders one aligned row per segment") {
  MetricReport report = evaluate_run({run_list("q1", {"gold"})}, qrels_of("q1", {"gold"}),
                                     {{1, 5}, 3});
  std::string table = render_metric_table({{"overall", report}, {"initial", report}});
  CHECK(table.find("MRR") != std::string::npos);
  CHECK(table.find("NDCG@3") != std::string::npos);
  CHECK(table.find("R@5") != std::string::npos);
  CHECK(table.find("overall") != std::string::npos);
  CHECK(table.find("initial") != std::string::npos);
  CHECK(table.find("1.0000") != std::string::npos);
}

}  // TEST_SUITE
