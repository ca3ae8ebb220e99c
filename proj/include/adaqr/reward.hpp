#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "adaqr/corpus.hpp"
#include "adaqr/ranked_list.hpp"
#include "adaqr/scorer.hpp"

namespace adaqr {

enum class RewardMethod { Marginal, Concat, GoldRank, PseudoLabel };

std::string reward_method_name(RewardMethod method);
RewardMethod parse_reward_method(const std::string& name);

struct RewardComponent {
  std::string passage_id;
  double weight = 0.0;
  double logprob = 0.0;
};

/// Scalar reward for one rewrite candidate, with per-passage components
/// retained for audit and for recomputing smaller-K rewards without
/// re-scoring.
struct RewardRecord {
  CandidateKey key;
  RewardMethod method = RewardMethod::Marginal;
  double value = 0.0;
  int k_used = 0;
  std::vector<RewardComponent> components;
};

/// F1 over lowercase alphanumeric token multisets. 0 if either side is empty
/// or nothing overlaps.
double token_f1(const std::string& a, const std::string& b);

/// Expected answer log-likelihood under the retrieval distribution:
/// value = sum_k weight_k * logprob_k. `scores` must cover the same passage
/// ids in the same order as `dist`.
RewardRecord marginal_reward(const RetrievalDistribution& dist,
                             const std::vector<ScoreRecord>& scores);

/// Single scorer call on the rank-order concatenation of the passages
/// (joined by a blank line). Coincides with the marginal reward at K=1.
RewardRecord concat_reward(const ScorerBackend& backend, const CandidateKey& key,
                           const std::string& context,
                           const std::vector<std::string>& passages, const std::string& answer);

/// Reciprocal rank of the best-ranked gold passage; 0 when none retrieved.
RewardRecord gold_rank_reward(const CandidateKey& key, const RankedList& list,
                              const std::set<std::string>& gold_ids);

/// Weak supervision without labels: the retrieved passage (within `depth`)
/// with maximal token F1 to the answer is treated as pseudo-relevant, ties by
/// ascending passage id; value = reciprocal rank of that passage. The single
/// component records (pseudo passage id, its F1, 0).
RewardRecord pseudo_label_reward(const CandidateKey& key, const RankedList& list,
                                 const PassageCorpus& corpus, const std::string& answer,
                                 int depth = 100);

// Line-delimited reward dump.
void save_rewards(const std::vector<RewardRecord>& rewards, const std::filesystem::path& path);
std::vector<RewardRecord> load_rewards(const std::filesystem::path& path);

}  // namespace adaqr
