#include "adaqr/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "adaqr/error.hpp"
#include "adaqr/io.hpp"
#include "adaqr/reward.hpp"

namespace adaqr {

std::set<std::string> Qrels::positives(const std::string& query_id) const {
  std::set<std::string> out;
  auto it = grades.find(query_id);
  if (it == grades.end()) return out;
  for (const auto& [pid, grade] : it->second)
    if (grade > 0) out.insert(pid);
  return out;
}

Qrels load_qrels(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open qrels file: " + path.string());
  Qrels qrels;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    line_no++;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ss(line);
    std::string qid, zero, pid;
    int grade;
    if (!(ss >> qid >> zero >> pid >> grade))
      throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                            ": malformed qrels line");
    if (grade < 0)
      throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                            ": negative relevance grade");
    qrels.grades[qid][pid] = grade;
  }
  return qrels;
}

void save_qrels(const Qrels& qrels, const std::filesystem::path& path) {
  std::string out;
  for (const auto& [qid, docs] : qrels.grades)
    for (const auto& [pid, grade] : docs)
      out += qid + " 0 " + pid + " " + std::to_string(grade) + "\n";
  io::write_file_atomic(path, out);
}

namespace {

QueryMetrics score_one_query(const std::vector<RankedEntry>& entries,
                             const std::map<std::string, int>& judged,
                             const EvalOptions& options, size_t depth) {
  QueryMetrics m;
  size_t total_relevant = 0;
  for (const auto& [pid, grade] : judged)
    if (grade > 0) total_relevant++;

  size_t n = std::min(entries.size(), depth);
  size_t hits = 0;
  double ap_sum = 0.0;
  double dcg = 0.0;
  for (size_t i = 0; i < n; i++) {
    auto it = judged.find(entries[i].passage_id);
    int grade = it == judged.end() ? 0 : it->second;
    if (grade > 0) {
      hits++;
      if (m.mrr == 0.0) m.mrr = 1.0 / static_cast<double>(i + 1);
      ap_sum += static_cast<double>(hits) / static_cast<double>(i + 1);
    }
    if (static_cast<int>(i) < options.ndcg_cutoff)
      dcg += static_cast<double>(grade) / std::log2(static_cast<double>(i) + 2.0);
    for (int k : options.ks)
      if (static_cast<int>(i) < k && grade > 0) m.recall[k] += 1.0;
  }
  if (total_relevant > 0) {
    m.map = ap_sum / static_cast<double>(total_relevant);
    for (int k : options.ks) m.recall[k] /= static_cast<double>(total_relevant);
  }

  std::vector<int> ideal;
  for (const auto& [pid, grade] : judged)
    if (grade > 0) ideal.push_back(grade);
  std::sort(ideal.rbegin(), ideal.rend());
  double idcg = 0.0;
  for (size_t i = 0; i < ideal.size() && static_cast<int>(i) < options.ndcg_cutoff; i++)
    idcg += static_cast<double>(ideal[i]) / std::log2(static_cast<double>(i) + 2.0);
  if (idcg > 0.0) m.ndcg = dcg / idcg;
  for (int k : options.ks) m.recall.emplace(k, 0.0);  // ensure every cutoff is present
  return m;
}

}  // namespace

MetricReport evaluate_run(const std::vector<RankedList>& run, const Qrels& qrels,
                          const EvalOptions& options) {
  if (options.ks.empty()) throw ValidationError("evaluate_run: no recall cutoffs configured");
  if (options.ndcg_cutoff < 1) throw ValidationError("evaluate_run: ndcg cutoff must be >= 1");
  bool any_positive = false;
  for (const auto& [qid, docs] : qrels.grades)
    for (const auto& [pid, grade] : docs)
      if (grade > 0) any_positive = true;
  if (!any_positive) throw ValidationError("evaluate_run: qrels carry no positive judgment");

  size_t depth = static_cast<size_t>(options.ndcg_cutoff);
  for (int k : options.ks) depth = std::max(depth, static_cast<size_t>(k));

  std::map<std::string, const RankedList*> by_qid;
  for (const RankedList& list : run) {
    validate_ranked_list(list);
    by_qid[list.query_id] = &list;
  }

  MetricReport report;
  report.ks = options.ks;
  std::sort(report.ks.begin(), report.ks.end());
  report.ndcg_cutoff = options.ndcg_cutoff;

  static const std::vector<RankedEntry> kEmpty;
  for (const auto& [qid, judged] : qrels.grades) {
    bool has_positive = false;
    for (const auto& [pid, grade] : judged)
      if (grade > 0) has_positive = true;
    if (!has_positive) continue;  // unjudgeable query, nothing to score against
    auto it = by_qid.find(qid);
    const std::vector<RankedEntry>& entries = it == by_qid.end() ? kEmpty : it->second->entries;
    report.per_query[qid] = score_one_query(entries, judged, options, depth);
  }
  report.query_count = report.per_query.size();
  if (report.query_count == 0) throw ValidationError("evaluate_run: no evaluable query");

  for (const auto& [qid, m] : report.per_query) {
    report.mean.mrr += m.mrr;
    report.mean.map += m.map;
    report.mean.ndcg += m.ndcg;
    for (const auto& [k, v] : m.recall) report.mean.recall[k] += v;
  }
  double n = static_cast<double>(report.query_count);
  report.mean.mrr /= n;
  report.mean.map /= n;
  report.mean.ndcg /= n;
  for (auto& [k, v] : report.mean.recall) v /= n;
  return report;
}

namespace {

std::set<std::string> gold_set_for(const Turn& turn, const TurnKey& key, const Qrels& qrels) {
  if (turn.gold_passage_ids)
    return {turn.gold_passage_ids->begin(), turn.gold_passage_ids->end()};
  return qrels.positives(key.str());
}

}  // namespace

TopicShiftSplit topic_shift_split(const ConversationSet& conversations, const Qrels& qrels) {
  TopicShiftSplit split;
  for (const Conversation& conv : conversations.conversations()) {
    std::set<std::string> previous_gold;
    for (const Turn& turn : conv.turns) {
      TurnKey key{conv.conversation_id, turn.turn_index};
      std::set<std::string> gold = gold_set_for(turn, key, qrels);
      if (gold.empty()) {
        split.excluded++;
        previous_gold.clear();
        continue;
      }
      if (turn.turn_index == 1) {
        split.initial.push_back(key);
      } else {
        bool disjoint = true;
        for (const auto& g : gold)
          if (previous_gold.count(g) != 0) disjoint = false;
        (disjoint ? split.shift : split.concentrated).push_back(key);
      }
      previous_gold = std::move(gold);
    }
  }
  return split;
}

F1Profile answer_passage_f1_profile(const ConversationSet& conversations, const Qrels& qrels,
                                    const PassageCorpus& corpus) {
  F1Profile profile;
  double sum = 0.0;
  for (const Conversation& conv : conversations.conversations()) {
    for (const Turn& turn : conv.turns) {
      TurnKey key{conv.conversation_id, turn.turn_index};
      std::set<std::string> gold = gold_set_for(turn, key, qrels);
      if (gold.empty() || turn.answer.empty()) {
        profile.skipped++;
        continue;
      }
      double best = -1.0;
      for (const auto& gid : gold) {
        auto it = corpus.passages.find(gid);
        if (it == corpus.passages.end()) continue;
        best = std::max(best, token_f1(turn.answer, it->second));
      }
      if (best < 0.0) {  // no gold id resolved against the corpus
        profile.skipped++;
        continue;
      }
      sum += best;
      profile.evaluated++;
    }
  }
  if (profile.evaluated > 0) profile.mean = sum / static_cast<double>(profile.evaluated);
  return profile;
}

std::string render_metric_table(const std::vector<std::pair<std::string, MetricReport>>& rows) {
  std::ostringstream out;
  if (rows.empty()) return "";
  const MetricReport& first = rows.front().second;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%-18s %8s %8s %8s", "segment", "queries", "MRR", "MAP");
  out << buf;
  std::snprintf(buf, sizeof(buf), " %8s", ("NDCG@" + std::to_string(first.ndcg_cutoff)).c_str());
  out << buf;
  for (int k : first.ks) {
    std::snprintf(buf, sizeof(buf), " %8s", ("R@" + std::to_string(k)).c_str());
    out << buf;
  }
  out << "\n";
  for (const auto& [name, report] : rows) {
    std::snprintf(buf, sizeof(buf), "%-18s %8zu %8.4f %8.4f %8.4f", name.c_str(),
                  report.query_count, report.mean.mrr, report.mean.map, report.mean.ndcg);
    out << buf;
    for (int k : report.ks) {
      auto it = report.mean.recall.find(k);
      std::snprintf(buf, sizeof(buf), " %8.4f",
                    it == report.mean.recall.end() ? 0.0 : it->second);
      out << buf;
    }
    out << "\n";
  }
  return out.str();
}

}  // namespace adaqr
