#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "adaqr/corpus.hpp"
#include "adaqr/ranked_list.hpp"

namespace adaqr {

/// Relevance judgments: query id -> passage id -> grade (>= 0). An included
/// query must carry at least one positive grade.
struct Qrels {
  std::map<std::string, std::map<std::string, int>> grades;

  std::set<std::string> positives(const std::string& query_id) const;
};

Qrels load_qrels(const std::filesystem::path& path);  // TREC "qid 0 pid rel"
void save_qrels(const Qrels& qrels, const std::filesystem::path& path);

struct QueryMetrics {
  double mrr = 0.0;
  double map = 0.0;
  double ndcg = 0.0;
  std::map<int, double> recall;  // cutoff -> value
};

struct MetricReport {
  std::vector<int> ks;
  int ndcg_cutoff = 3;
  size_t query_count = 0;
  std::map<std::string, QueryMetrics> per_query;
  QueryMetrics mean;
};

struct EvalOptions {
  std::vector<int> ks{1, 5, 10};
  int ndcg_cutoff = 3;
};

/// Scores a run against qrels. Evaluation depth is the deepest configured
/// cutoff, so entries below it never influence any reported metric. Qrels
/// queries missing from the run score 0; run queries without judgments are
/// ignored.
///   MRR     reciprocal rank of the first relevant passage
///   MAP     mean of precision-at-hit over the total relevant count
///   NDCG    gain = grade, discount 1/log2(rank+1), ideal-normalized, cutoff 3
///   R@k     relevant retrieved in top k / total relevant
MetricReport evaluate_run(const std::vector<RankedList>& run, const Qrels& qrels,
                          const EvalOptions& options = {});

/// Turn partition used for segmented reporting: first turns are `initial`;
/// a later turn is `shift` when its gold passage set is disjoint from the
/// previous turn's, else `concentrated`. Gold sets come from the turn's
/// labels, falling back to qrels positives; turns with no gold are excluded
/// and counted.
struct TopicShiftSplit {
  std::vector<TurnKey> initial;
  std::vector<TurnKey> shift;
  std::vector<TurnKey> concentrated;
  size_t excluded = 0;
};

TopicShiftSplit topic_shift_split(const ConversationSet& conversations, const Qrels& qrels);

/// Mean over evaluated turns of max token_f1(answer, gold passage text):
/// how much surface overlap answers have with their supporting passages.
struct F1Profile {
  double mean = 0.0;
  size_t evaluated = 0;
  size_t skipped = 0;
};

F1Profile answer_passage_f1_profile(const ConversationSet& conversations, const Qrels& qrels,
                                    const PassageCorpus& corpus);

/// Aligned plain-text metric table; one row per (segment, query-count) line.
std::string render_metric_table(const std::vector<std::pair<std::string, MetricReport>>& rows);

}  // namespace adaqr
