#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace adaqr {

/// One conversation turn: the user question, the system answer, and optional
/// supervision (a human rewrite and/or gold passage labels).
struct Turn {
  int turn_index = 0;  // 1-based
  std::string question;
  std::string answer;  // may be empty; such turns are filtered before reward collection
  std::optional<std::string> human_rewrite;
  std::optional<std::vector<std::string>> gold_passage_ids;
};

struct Conversation {
  std::string conversation_id;
  std::vector<Turn> turns;
};

/// Identifies one turn across the pipeline. Rendered as "{conv}_{turn}" in
/// query ids and TREC files.
struct TurnKey {
  std::string conversation_id;
  int turn_index = 0;

  auto operator<=>(const TurnKey&) const = default;
  std::string str() const { return conversation_id + "_" + std::to_string(turn_index); }
};

struct InstanceCounts {
  size_t conversations = 0;
  size_t turns = 0;
  size_t with_answer = 0;
  size_t with_answer_non_first = 0;
};

class ConversationSet {
 public:
  void add(Conversation conv);  // validates invariants, rejects duplicate ids

  const std::vector<Conversation>& conversations() const { return conversations_; }
  const Conversation* find(const std::string& conversation_id) const;
  const Turn* find_turn(const TurnKey& key) const;
  InstanceCounts counts() const;

 private:
  std::vector<Conversation> conversations_;
  std::map<std::string, size_t> by_id_;
};

/// Fixed-dimension vectors aligned to string ids, stored contiguously.
struct EmbeddingTable {
  size_t dim = 0;
  std::vector<std::string> ids;
  std::vector<float> data;  // ids.size() * dim

  const float* vector_for(size_t row) const { return data.data() + row * dim; }
  std::optional<size_t> row_of(const std::string& id) const;

 private:
  mutable std::map<std::string, size_t> row_index_;  // built lazily
};

struct PassageCorpus {
  std::map<std::string, std::string> passages;  // id -> text
  std::optional<EmbeddingTable> embeddings;

  const std::string& text_of(const std::string& passage_id) const;
};

/// Rewrite candidates per turn, plus how they were sampled.
struct CandidateSet {
  std::map<TurnKey, std::vector<std::string>> entries;
  double sampling_temperature = 1.0;
  int candidate_count = 3;
};

enum class QueryPolicy { Qrecc, Topiocqa, Doc2dialLike };

QueryPolicy parse_policy(const std::string& tag);  // "qrecc" | "topiocqa" | "doc2dial"
std::string policy_name(QueryPolicy policy);

struct ResolvedQuery {
  bool included = false;  // false: turn excluded from evaluation under this policy
  std::string text;
};

// --- loading / saving (schemas documented in README) ---

ConversationSet load_conversations(const std::filesystem::path& path);
void save_conversations(const ConversationSet& set, const std::filesystem::path& path);

PassageCorpus load_passages(const std::filesystem::path& path);

/// Binary vectors plus a sidecar id list (one id per line, order-aligned).
EmbeddingTable load_embeddings(const std::filesystem::path& bin_path,
                               const std::filesystem::path& ids_path);
void save_embeddings(const EmbeddingTable& table, const std::filesystem::path& bin_path,
                     const std::filesystem::path& ids_path);

/// Attach embeddings to a corpus, checking every embedded id resolves.
void attach_embeddings(PassageCorpus& corpus, EmbeddingTable table);

CandidateSet load_candidates(const std::filesystem::path& path);

/// Verify every gold_passage_id in the set resolves against the corpus.
void validate_gold_ids(const ConversationSet& set, const PassageCorpus& corpus);

// --- canonical prompt/query construction ---

/// Canonical context string shared by rewriting prompts and scoring prompts:
/// prior turns as "Q: {q} A: {a}" joined by single spaces inside square
/// brackets, then the current question on its own "Question:" line.
std::string serialize_history(const Conversation& conv, int turn_index);

/// Query used when evaluating retrieval for a turn. First turns follow the
/// dataset policy; non-first turns use the rewrite under evaluation, which
/// the caller supplies.
ResolvedQuery resolve_query(const Conversation& conv, int turn_index, QueryPolicy policy,
                            const std::string& rewrite_under_eval = "");

}  // namespace adaqr
