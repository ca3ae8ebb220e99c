#include "adaqr/reward.hpp"

#include <algorithm>
#include <map>

#include <nlohmann/json.hpp>

#include "adaqr/error.hpp"
#include "adaqr/io.hpp"
#include "adaqr/text.hpp"

namespace adaqr {

using nlohmann::json;

std::string reward_method_name(RewardMethod method) {
  switch (method) {
    case RewardMethod::Marginal: return "marginal";
    case RewardMethod::Concat: return "concat";
    case RewardMethod::GoldRank: return "gold_rank";
    case RewardMethod::PseudoLabel: return "pseudo_label";
  }
  return "?";
}

RewardMethod parse_reward_method(const std::string& name) {
  if (name == "marginal") return RewardMethod::Marginal;
  if (name == "concat") return RewardMethod::Concat;
  if (name == "gold" || name == "gold_rank") return RewardMethod::GoldRank;
  if (name == "pseudo" || name == "pseudo_label") return RewardMethod::PseudoLabel;
  throw ValidationError("unknown reward method: " + name);
}

double token_f1(const std::string& a, const std::string& b) {
  std::vector<std::string> ta = text::tokenize(a);
  std::vector<std::string> tb = text::tokenize(b);
  if (ta.empty() || tb.empty()) return 0.0;
  std::map<std::string, int> counts;
  for (const auto& t : ta) counts[t]++;
  size_t overlap = 0;
  for (const auto& t : tb) {
    auto it = counts.find(t);
    if (it != counts.end() && it->second > 0) {
      it->second--;
      overlap++;
    }
  }
  if (overlap == 0) return 0.0;
  double precision = static_cast<double>(overlap) / static_cast<double>(tb.size());
  double recall = static_cast<double>(overlap) / static_cast<double>(ta.size());
  return 2.0 * precision * recall / (precision + recall);
}

RewardRecord marginal_reward(const RetrievalDistribution& dist,
                             const std::vector<ScoreRecord>& scores) {
  if (dist.weights.empty()) throw ValidationError("marginal_reward: empty distribution");
  if (dist.weights.size() != scores.size())
    throw ValidationError("marginal_reward: " + std::to_string(dist.weights.size()) +
                          " weights vs " + std::to_string(scores.size()) + " scores");
  RewardRecord record;
  record.key = scores.front().key;
  record.method = RewardMethod::Marginal;
  record.k_used = static_cast<int>(dist.weights.size());
  record.components.reserve(scores.size());
  double value = 0.0;
  for (size_t i = 0; i < scores.size(); i++) {
    const auto& [passage_id, weight] = dist.weights[i];
    if (scores[i].passage_id != passage_id)
      throw ValidationError("marginal_reward: passage id mismatch at position " +
                            std::to_string(i + 1) + ": " + passage_id + " vs " +
                            scores[i].passage_id);
    if (scores[i].key != record.key)
      throw ValidationError("marginal_reward: scores span multiple candidates");
    value += weight * scores[i].logprob;
    record.components.push_back(RewardComponent{passage_id, weight, scores[i].logprob});
  }
  record.value = value;
  return record;
}

RewardRecord concat_reward(const ScorerBackend& backend, const CandidateKey& key,
                           const std::string& context,
                           const std::vector<std::string>& passages, const std::string& answer) {
  if (passages.empty()) throw ValidationError("concat_reward: no passages");
  std::string joined;
  for (size_t i = 0; i < passages.size(); i++) {
    if (i > 0) joined += "\n\n";
    joined += passages[i];
  }
  RewardRecord record;
  record.key = key;
  record.method = RewardMethod::Concat;
  record.k_used = static_cast<int>(passages.size());
  record.value = backend.score(ScoringRequest{context, joined, answer});
  return record;
}

RewardRecord gold_rank_reward(const CandidateKey& key, const RankedList& list,
                              const std::set<std::string>& gold_ids) {
  if (gold_ids.empty()) throw ValidationError("gold_rank_reward: empty gold id set");
  RewardRecord record;
  record.key = key;
  record.method = RewardMethod::GoldRank;
  record.k_used = std::max<int>(1, static_cast<int>(list.entries.size()));
  record.value = 0.0;
  for (const RankedEntry& e : list.entries) {
    if (gold_ids.count(e.passage_id) != 0) {
      record.value = 1.0 / static_cast<double>(e.rank);
      break;
    }
  }
  return record;
}

RewardRecord pseudo_label_reward(const CandidateKey& key, const RankedList& list,
                                 const PassageCorpus& corpus, const std::string& answer,
                                 int depth) {
  if (list.entries.empty())
    throw ValidationError("pseudo_label_reward: empty ranked list, skip this candidate");
  if (answer.empty()) throw ValidationError("pseudo_label_reward: empty answer");
  if (depth < 1) throw ValidationError("pseudo_label_reward: depth must be >= 1");

  size_t n = std::min(static_cast<size_t>(depth), list.entries.size());
  size_t best = 0;
  double best_f1 = -1.0;
  for (size_t i = 0; i < n; i++) {
    double f1 = token_f1(answer, corpus.text_of(list.entries[i].passage_id));
    bool better = f1 > best_f1 ||
                  (f1 == best_f1 && list.entries[i].passage_id < list.entries[best].passage_id);
    if (better) {
      best = i;
      best_f1 = f1;
    }
  }
  RewardRecord record;
  record.key = key;
  record.method = RewardMethod::PseudoLabel;
  record.k_used = static_cast<int>(n);
  record.value = 1.0 / static_cast<double>(list.entries[best].rank);
  record.components.push_back(RewardComponent{list.entries[best].passage_id, best_f1, 0.0});
  return record;
}

void save_rewards(const std::vector<RewardRecord>& rewards, const std::filesystem::path& path) {
  std::string out;
  for (const RewardRecord& r : rewards) {
    json j;
    j["conversation_id"] = r.key.conversation_id;
    j["turn_index"] = r.key.turn_index;
    j["candidate_index"] = r.key.candidate_index;
    j["method"] = reward_method_name(r.method);
    j["value"] = r.value;
    j["k_used"] = r.k_used;
    json comps = json::array();
    for (const RewardComponent& c : r.components)
      comps.push_back({{"passage_id", c.passage_id}, {"weight", c.weight}, {"logprob", c.logprob}});
    j["components"] = std::move(comps);
    out += j.dump();
    out += '\n';
  }
  io::write_file_atomic(path, out);
}

std::vector<RewardRecord> load_rewards(const std::filesystem::path& path) {
  std::vector<RewardRecord> rewards;
  io::for_each_jsonl(path, [&](size_t line_no, const json& j) {
    const std::string where = path.string() + ":" + std::to_string(line_no);
    RewardRecord r;
    try {
      r.key.conversation_id = j.at("conversation_id").get<std::string>();
      r.key.turn_index = j.at("turn_index").get<int>();
      r.key.candidate_index = j.at("candidate_index").get<int>();
      r.method = parse_reward_method(j.at("method").get<std::string>());
      r.value = j.at("value").get<double>();
      r.k_used = j.at("k_used").get<int>();
      for (const auto& cj : j.value("components", json::array()))
        r.components.push_back(RewardComponent{cj.at("passage_id").get<std::string>(),
                                               cj.at("weight").get<double>(),
                                               cj.at("logprob").get<double>()});
    } catch (const json::exception& e) {
      throw ValidationError(where + ": bad reward record: " + e.what());
    }
    rewards.push_back(std::move(r));
  });
  return rewards;
}

}  // namespace adaqr
