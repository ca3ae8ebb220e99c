#include <doctest.h>

#include <cmath>
#include <random>

#include "adaqr/error.hpp"
#include "adaqr/ranked_list.hpp"

using namespace adaqr;

namespace {

RankedList list_of(const std::vector<double>& scores) {
  RankedList list;
  list.query_id = "q";
  for (size_t i = 0; i < scores.size(); i++)
    list.entries.push_back(RankedEntry{"p" + std::to_string(i), scores[i],
                                       static_cast<int>(i) + 1});
  return list;
}

}  // namespace

TEST_SUITE("distribution") {

TEST_CASE("equal scores split evenly") {
  RetrievalDistribution dist = retrieval_distribution(list_of({0.0, 0.0}), 2);
  REQUIRE(dist.weights.size() == 2);
  CHECK(dist.weights[0].second == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(dist.weights[1].second == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("hand softmax of (1, 0)") {
  RetrievalDistribution dist = retrieval_distribution(list_of({1.0, 0.0}), 2, 1.0);
  CHECK(dist.weights[0].second == doctest::Approx(0.7311).epsilon(1e-4));
  CHECK(dist.weights[1].second == doctest::Approx(0.2689).epsilon(1e-4));
}

TEST_CASE("weights sum to one and argmax matches rank 1") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> score(-30.0, 30.0);
  std::uniform_int_distribution<int> len(1, 12);
  for (int trial = 0; trial < 300; trial++) {
    std::vector<double> scores(static_cast<size_t>(len(rng)));
    for (auto& s : scores) s = score(rng);
    std::sort(scores.rbegin(), scores.rend());
    int k = std::uniform_int_distribution<int>(1, 12)(rng);
    RetrievalDistribution dist = retrieval_distribution(list_of(scores), k);
    double sum = 0.0;
    double max_weight = 0.0;
    for (const auto& [id, w] : dist.weights) {
      CHECK(w > 0.0);
      sum += w;
      max_weight = std::max(max_weight, w);
    }
    CHECK(std::abs(sum - 1.0) <= 1e-12);
    CHECK(dist.weights.size() == std::min(scores.size(), static_cast<size_t>(k)));
    CHECK(dist.weights[0].second == doctest::Approx(max_weight).epsilon(1e-15));
  }
}

TEST_CASE("shifting every score by a constant leaves weights bit-identical") {
  std::mt19937_64 rng(23);
  // dyadic scores/shifts keep the additions exact, so max-subtraction cancels
  std::uniform_int_distribution<int> grid(-5 << 20, 5 << 20);
  for (int trial = 0; trial < 200; trial++) {
    std::vector<double> scores(4);
    for (auto& s : scores) s = std::ldexp(static_cast<double>(grid(rng)), -20);
    std::sort(scores.rbegin(), scores.rend());
    double c = std::ldexp(static_cast<double>(grid(rng)), -20);
    std::vector<double> shifted = scores;
    for (auto& s : shifted) s += c;
    RetrievalDistribution a = retrieval_distribution(list_of(scores), 4);
    RetrievalDistribution b = retrieval_distribution(list_of(shifted), 4);
    for (size_t i = 0; i < a.weights.size(); i++)
      CHECK(a.weights[i].second == b.weights[i].second);  // exact
  }
}

TEST_CASE("temperature controls sharpness") {
  RetrievalDistribution sharp = retrieval_distribution(list_of({1.0, 0.0}), 2, 0.25);
  RetrievalDistribution flat = retrieval_distribution(list_of({1.0, 0.0}), 2, 4.0);
  CHECK(sharp.weights[0].second > 0.97);
  CHECK(flat.weights[0].second < 0.6);
}

TEST_CASE("k truncates to the available prefix") {
  RetrievalDistribution dist = retrieval_distribution(list_of({3.0, 2.0, 1.0}), 2);
  CHECK(dist.weights.size() == 2);
  CHECK(dist.weights[0].first == "p0");
  CHECK(dist.weights[1].first == "p1");
}

TEST_CASE("empty list and bad parameters are rejected") {
  CHECK_THROWS_AS(retrieval_distribution(RankedList{"q", {}}, 5), ValidationError);
  CHECK_THROWS_AS(retrieval_distribution(list_of({1.0}), 0), ValidationError);
  CHECK_THROWS_AS(retrieval_distribution(list_of({1.0}), 1, 0.0), ValidationError);
}

TEST_CASE("ranked list validation catches broken invariants") {
  RankedList bad_rank = list_of({2.0, 1.0});
  bad_rank.entries[1].rank = 3;
  CHECK_THROWS_AS(validate_ranked_list(bad_rank), ValidationError);

  RankedList bad_order = list_of({1.0, 2.0});
  CHECK_THROWS_AS(validate_ranked_list(bad_order), ValidationError);

  RankedList dup = list_of({2.0, 1.0});
  dup.entries[1].passage_id = dup.entries[0].passage_id;
  CHECK_THROWS_AS(validate_ranked_list(dup), ValidationError);
}

}  // TEST_SUITE
