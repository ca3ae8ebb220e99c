#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "adaqr/reward.hpp"

namespace adaqr {

enum class PairMode { All, MaxGap };

PairMode parse_pair_mode(const std::string& name);  // "all" | "max-gap"
std::string pair_mode_name(PairMode mode);

/// One DPO training unit: (prompt, preferred rewrite, dispreferred rewrite).
struct PreferencePair {
  std::string prompt;
  std::string chosen;
  std::string rejected;
  double reward_chosen = 0.0;
  double reward_rejected = 0.0;
  double gap = 0.0;  // reward_chosen - reward_rejected, > delta by construction
  CandidateKey chosen_key;
  CandidateKey rejected_key;
};

/// Pair the candidates of one instance under the reward-gap rule.
///
/// `candidates` holds the rewrite texts; each reward's candidate_index points
/// into it. mode=All emits every ordered pair with gap > delta (ascending
/// index order); mode=MaxGap emits at most the single largest-gap pair, ties
/// by lowest candidate indices. Pairs whose texts are identical are
/// suppressed: they carry no preference signal.
std::vector<PreferencePair> build_pairs(const std::string& prompt,
                                        const std::vector<std::string>& candidates,
                                        const std::vector<RewardRecord>& rewards, double delta,
                                        PairMode mode);

/// Line-delimited {"prompt","chosen","rejected","reward_chosen","reward_rejected"}.
size_t export_dpo_dataset(const std::vector<PreferencePair>& pairs,
                          const std::filesystem::path& path);
std::vector<PreferencePair> load_dpo_dataset(const std::filesystem::path& path);

// Internal pair dump retaining gap and candidate keys.
void save_pairs(const std::vector<PreferencePair>& pairs, const std::filesystem::path& path);
std::vector<PreferencePair> load_pairs(const std::filesystem::path& path);

/// Uniform sample of ceil(fraction * n) pairs without replacement,
/// deterministic per seed; original relative order is preserved.
std::vector<PreferencePair> subset_pairs(const std::vector<PreferencePair>& pairs,
                                         double fraction, uint64_t seed);

}  // namespace adaqr
