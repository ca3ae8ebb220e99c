#pragma once

#include <filesystem>

namespace adaqr::fixture {

struct FixturePaths {
  std::filesystem::path conversations;
  std::filesystem::path passages;
  std::filesystem::path candidates;
  std::filesystem::path qrels;
  std::filesystem::path embeddings;
  std::filesystem::path embedding_ids;
  std::filesystem::path query_embeddings;
  std::filesystem::path query_embedding_ids;
  std::filesystem::path config;
};

/// Writes the bundled synthetic dataset: 50 passages, 10 conversations of 3
/// turns, 3 rewrite candidates per trainable turn, gold labels, deterministic
/// stand-in embeddings, and a ready-to-run pipeline config.
///
/// Construction guarantees: each turn's answer tokens occur in exactly one
/// passage (its gold); candidate 0 retrieves that passage exclusively,
/// candidate 1 retrieves it first among filler matches, candidate 2 retrieves
/// only an unrelated passage. Rewards therefore order 0 > 1 > 2, and chosen
/// rewrites recall the answer-bearing passage more often than rejected ones.
FixturePaths write_fixture(const std::filesystem::path& dir);

}  // namespace adaqr::fixture
