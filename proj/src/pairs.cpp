#include "adaqr/pairs.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <nlohmann/json.hpp>

#include "adaqr/error.hpp"
#include "adaqr/io.hpp"

namespace adaqr {

using nlohmann::json;

PairMode parse_pair_mode(const std::string& name) {
  if (name == "all") return PairMode::All;
  if (name == "max-gap" || name == "max_gap") return PairMode::MaxGap;
  throw ValidationError("unknown pair mode: " + name + " (expected all or max-gap)");
}

std::string pair_mode_name(PairMode mode) {
  return mode == PairMode::All ? "all" : "max-gap";
}

std::vector<PreferencePair> build_pairs(const std::string& prompt,
                                        const std::vector<std::string>& candidates,
                                        const std::vector<RewardRecord>& rewards, double delta,
                                        PairMode mode) {
  if (delta < 0.0) throw ValidationError("build_pairs: delta must be >= 0");
  for (const RewardRecord& r : rewards) {
    if (r.key.conversation_id != rewards.front().key.conversation_id ||
        r.key.turn_index != rewards.front().key.turn_index)
      throw ValidationError("build_pairs: rewards span multiple instances");
    if (r.key.candidate_index < 0 ||
        r.key.candidate_index >= static_cast<int>(candidates.size()))
      throw ValidationError("build_pairs: reward references candidate " +
                            std::to_string(r.key.candidate_index) + " but only " +
                            std::to_string(candidates.size()) + " candidates exist");
  }

  std::vector<PreferencePair> out;
  if (rewards.size() < 2) return out;

  auto make_pair = [&](size_t w, size_t l) {
    PreferencePair p;
    p.prompt = prompt;
    p.chosen = candidates[static_cast<size_t>(rewards[w].key.candidate_index)];
    p.rejected = candidates[static_cast<size_t>(rewards[l].key.candidate_index)];
    p.reward_chosen = rewards[w].value;
    p.reward_rejected = rewards[l].value;
    p.gap = rewards[w].value - rewards[l].value;
    p.chosen_key = rewards[w].key;
    p.rejected_key = rewards[l].key;
    return p;
  };
  auto qualifies = [&](size_t w, size_t l) {
    if (w == l) return false;
    if (rewards[w].value - rewards[l].value <= delta) return false;
    return candidates[static_cast<size_t>(rewards[w].key.candidate_index)] !=
           candidates[static_cast<size_t>(rewards[l].key.candidate_index)];
  };

  if (mode == PairMode::All) {
    for (size_t w = 0; w < rewards.size(); w++)
      for (size_t l = 0; l < rewards.size(); l++)
        if (qualifies(w, l)) out.push_back(make_pair(w, l));
    return out;
  }

  // MaxGap: single best pair, ties resolved by lowest (chosen, rejected) indices.
  bool found = false;
  size_t best_w = 0, best_l = 0;
  for (size_t w = 0; w < rewards.size(); w++) {
    for (size_t l = 0; l < rewards.size(); l++) {
      if (!qualifies(w, l)) continue;
      double gap = rewards[w].value - rewards[l].value;
      if (!found || gap > rewards[best_w].value - rewards[best_l].value) {
        found = true;
        best_w = w;
        best_l = l;
      }
    }
  }
  if (found) out.push_back(make_pair(best_w, best_l));
  return out;
}

namespace {

std::string pairs_to_jsonl(const std::vector<PreferencePair>& pairs, bool with_provenance) {
  std::string out;
  for (const PreferencePair& p : pairs) {
    json j;
    j["prompt"] = p.prompt;
    j["chosen"] = p.chosen;
    j["rejected"] = p.rejected;
    j["reward_chosen"] = p.reward_chosen;
    j["reward_rejected"] = p.reward_rejected;
    if (with_provenance) {
      j["gap"] = p.gap;
      j["conversation_id"] = p.chosen_key.conversation_id;
      j["turn_index"] = p.chosen_key.turn_index;
      j["chosen_index"] = p.chosen_key.candidate_index;
      j["rejected_index"] = p.rejected_key.candidate_index;
    }
    out += j.dump();
    out += '\n';
  }
  return out;
}

PreferencePair pair_from_json(const json& j, const std::string& where) {
  PreferencePair p;
  try {
    p.prompt = j.at("prompt").get<std::string>();
    p.chosen = j.at("chosen").get<std::string>();
    p.rejected = j.at("rejected").get<std::string>();
    p.reward_chosen = j.at("reward_chosen").get<double>();
    p.reward_rejected = j.at("reward_rejected").get<double>();
    p.gap = j.value("gap", p.reward_chosen - p.reward_rejected);
    if (j.contains("conversation_id")) {
      p.chosen_key.conversation_id = j["conversation_id"].get<std::string>();
      p.rejected_key.conversation_id = p.chosen_key.conversation_id;
      p.chosen_key.turn_index = j.value("turn_index", 0);
      p.rejected_key.turn_index = p.chosen_key.turn_index;
      p.chosen_key.candidate_index = j.value("chosen_index", 0);
      p.rejected_key.candidate_index = j.value("rejected_index", 0);
    }
  } catch (const json::exception& e) {
    throw ValidationError(where + ": bad preference pair: " + e.what());
  }
  return p;
}

}  // namespace

size_t export_dpo_dataset(const std::vector<PreferencePair>& pairs,
                          const std::filesystem::path& path) {
  io::write_file_atomic(path, pairs_to_jsonl(pairs, false));
  return pairs.size();
}

std::vector<PreferencePair> load_dpo_dataset(const std::filesystem::path& path) {
  std::vector<PreferencePair> pairs;
  io::for_each_jsonl(path, [&](size_t line_no, const json& j) {
    pairs.push_back(pair_from_json(j, path.string() + ":" + std::to_string(line_no)));
  });
  return pairs;
}

void save_pairs(const std::vector<PreferencePair>& pairs, const std::filesystem::path& path) {
  io::write_file_atomic(path, pairs_to_jsonl(pairs, true));
}

std::vector<PreferencePair> load_pairs(const std::filesystem::path& path) {
  return load_dpo_dataset(path);
}

std::vector<PreferencePair> subset_pairs(const std::vector<PreferencePair>& pairs,
                                         double fraction, uint64_t seed) {
  if (!(fraction > 0.0) || fraction > 1.0)
    throw ValidationError("subset_pairs: fraction must be in (0, 1]");
  size_t n = pairs.size();
  if (n == 0) return {};
  // Guard against 0.2 * 100 = 20.000000000000004 ceiling to 21.
  size_t m = static_cast<size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9));
  m = std::min(std::max<size_t>(m, 1), n);

  std::vector<size_t> indices(n);
  for (size_t i = 0; i < n; i++) indices[i] = i;
  std::mt19937_64 rng(seed);
  for (size_t i = 0; i < m; i++) {
    std::uniform_int_distribution<size_t> pick(i, n - 1);
    std::swap(indices[i], indices[pick(rng)]);
  }
  indices.resize(m);
  std::sort(indices.begin(), indices.end());

  std::vector<PreferencePair> out;
  out.reserve(m);
  for (size_t i : indices) out.push_back(pairs[i]);
  return out;
}

}  // namespace adaqr
