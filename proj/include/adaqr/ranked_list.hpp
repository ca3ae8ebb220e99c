#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace adaqr {

struct RankedEntry {
  std::string passage_id;
  double score = 0.0;
  int rank = 0;  // 1-based
};

/// An ordered retrieval result: the unit exchanged between retrieval, reward,
/// and evaluation.
struct RankedList {
  std::string query_id;
  std::vector<RankedEntry> entries;
};

/// Asserts ranks are contiguous from 1, scores non-increasing, ids distinct.
void validate_ranked_list(const RankedList& list);

/// Softmax over retrieval scores of the top-k prefix: the distribution that
/// weights per-passage answer scores in the marginal reward.
struct RetrievalDistribution {
  std::string query_id;
  std::vector<std::pair<std::string, double>> weights;  // (passage_id, probability)
};

/// Takes the first min(k, len) entries; weight_j = exp(score_j / temperature)
/// normalized, computed with max-subtraction. Empty list is an error: the
/// caller must skip the candidate.
RetrievalDistribution retrieval_distribution(const RankedList& list, int k,
                                             double temperature = 1.0);

// TREC run format: "qid Q0 passage_id rank score tag"
void write_trec_run(const std::vector<RankedList>& run, const std::filesystem::path& path,
                    const std::string& tag);
std::vector<RankedList> read_trec_run(const std::filesystem::path& path);

}  // namespace adaqr
