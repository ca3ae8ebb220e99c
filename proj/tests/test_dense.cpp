#include <doctest.h>

#include <filesystem>
#include <random>

#include "adaqr/dense.hpp"
#include "adaqr/error.hpp"
#include "support/oracles.hpp"

using namespace adaqr;

namespace {

EmbeddingTable table_of(const std::vector<std::string>& ids,
                        const std::vector<std::vector<float>>& vectors) {
  EmbeddingTable table;
  table.ids = ids;
  table.dim = vectors.empty() ? 0 : vectors[0].size();
  for (const auto& v : vectors) table.data.insert(table.data.end(), v.begin(), v.end());
  return table;
}

}  // namespace

TEST_SUITE("dense") {

TEST_CASE("orthogonal basis vectors retrieve their own direction") {
  DenseIndex index = DenseIndex::build(table_of({"d1", "d2"}, {{1, 0}, {0, 1}}));
  std::vector<float> q{1.0f, 0.0f};
  RankedList list = index.search(q, 2, "q");
  REQUIRE(list.entries.size() == 2);
  CHECK(list.entries[0].passage_id == "d1");
  CHECK(list.entries[0].score == doctest::Approx(1.0));
  CHECK(list.entries[1].score == doctest::Approx(0.0));
}

TEST_CASE("zero query vector ties everything, ordered by id") {
  DenseIndex index = DenseIndex::build(table_of({"b", "a", "c"}, {{1, 2}, {3, 4}, {5, 6}}));
  std::vector<float> q{0.0f, 0.0f};
  RankedList list = index.search(q, 3, "q");
  REQUIRE(list.entries.size() == 3);
  CHECK(list.entries[0].passage_id == "a");
  CHECK(list.entries[1].passage_id == "b");
  CHECK(list.entries[2].passage_id == "c");
  for (const auto& e : list.entries) CHECK(e.score == 0.0);
}

TEST_CASE("dimension mismatch is rejected") {
  DenseIndex index = DenseIndex::build(table_of({"d1"}, {{1, 0}}));
  std::vector<float> q{1.0f, 0.0f, 0.0f};
  CHECK_THROWS_AS(index.search(q, 1, "q"), ValidationError);
}

TEST_CASE("matches the exhaustive scan on a random 50x16 table") {
  std::mt19937_64 rng(123);
  std::normal_distribution<float> gauss(0.0f, 1.0f);
  std::vector<std::string> ids;
  std::vector<std::vector<float>> vectors;
  for (int i = 0; i < 50; i++) {
    ids.push_back("v" + std::to_string(100 + i));
    std::vector<float> v(16);
    for (auto& x : v) x = gauss(rng);
    vectors.push_back(std::move(v));
  }
  DenseIndex index = DenseIndex::build(table_of(ids, vectors));
  for (int trial = 0; trial < 20; trial++) {
    std::vector<float> q(16);
    for (auto& x : q) x = gauss(rng);
    RankedList got = index.search(q, 50, "q");
    std::vector<oracles::ScoredDoc> want = oracles::dense_scan(ids, vectors, q);
    REQUIRE(got.entries.size() == want.size());
    for (size_t i = 0; i < want.size(); i++) {
      CHECK(got.entries[i].passage_id == want[i].id);
      CHECK(got.entries[i].score == doctest::Approx(want[i].score).epsilon(1e-12));
    }
  }
}

TEST_CASE("save/load round-trips search results") {
  std::mt19937_64 rng(5);
  std::normal_distribution<float> gauss(0.0f, 1.0f);
  std::vector<std::string> ids;
  std::vector<std::vector<float>> vectors;
  for (int i = 0; i < 12; i++) {
    ids.push_back("v" + std::to_string(i));
    std::vector<float> v(8);
    for (auto& x : v) x = gauss(rng);
    vectors.push_back(std::move(v));
  }
  DenseIndex index = DenseIndex::build(table_of(ids, vectors));
  auto path = std::filesystem::temp_directory_path() / "adaqr_dense.idx";
  index.save(path);
  DenseIndex loaded = DenseIndex::load(path);
  CHECK(loaded.dim() == 8);
  std::vector<float> q(8);
  for (auto& x : q) x = gauss(rng);
  RankedList a = index.search(q, 12, "q");
  RankedList b = loaded.search(q, 12, "q");
  REQUIRE(a.entries.size() == b.entries.size());
  for (size_t i = 0; i < a.entries.size(); i++) {
    CHECK(a.entries[i].passage_id == b.entries[i].passage_id);
    CHECK(a.entries[i].score == b.entries[i].score);
  }
}

TEST_CASE("duplicate ids are rejected at build") {
  CHECK_THROWS_AS(DenseIndex::build(table_of({"d1", "d1"}, {{1, 0}, {0, 1}})),
                  ValidationError);
}

}  // TEST_SUITE
