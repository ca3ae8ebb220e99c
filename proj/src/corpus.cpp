#include "adaqr/corpus.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "adaqr/error.hpp"
#include "adaqr/io.hpp"

namespace adaqr {

using nlohmann::json;

void ConversationSet::add(Conversation conv) {
  if (conv.conversation_id.empty())
    throw ValidationError("conversation with empty conversation_id");
  if (by_id_.count(conv.conversation_id) != 0)
    throw ValidationError("duplicate conversation_id: " + conv.conversation_id);
  if (conv.turns.empty())
    throw ValidationError("conversation " + conv.conversation_id + " has no turns");
  for (size_t i = 0; i < conv.turns.size(); i++) {
    const Turn& t = conv.turns[i];
    if (t.turn_index != static_cast<int>(i) + 1)
      throw ValidationError("conversation " + conv.conversation_id +
                            ": turn indices must be contiguous from 1, got " +
                            std::to_string(t.turn_index) + " at position " + std::to_string(i + 1));
    if (t.question.empty())
      throw ValidationError("conversation " + conv.conversation_id + " turn " +
                            std::to_string(t.turn_index) + ": empty question");
    if (t.gold_passage_ids && t.gold_passage_ids->empty())
      throw ValidationError("conversation " + conv.conversation_id + " turn " +
                            std::to_string(t.turn_index) + ": gold_passage_ids present but empty");
  }
  by_id_[conv.conversation_id] = conversations_.size();
  conversations_.push_back(std::move(conv));
}

const Conversation* ConversationSet::find(const std::string& conversation_id) const {
  auto it = by_id_.find(conversation_id);
  return it == by_id_.end() ? nullptr : &conversations_[it->second];
}

const Turn* ConversationSet::find_turn(const TurnKey& key) const {
  const Conversation* conv = find(key.conversation_id);
  if (conv == nullptr) return nullptr;
  if (key.turn_index < 1 || key.turn_index > static_cast<int>(conv->turns.size())) return nullptr;
  return &conv->turns[static_cast<size_t>(key.turn_index) - 1];
}

InstanceCounts ConversationSet::counts() const {
  InstanceCounts c;
  c.conversations = conversations_.size();
  for (const auto& conv : conversations_) {
    for (const auto& turn : conv.turns) {
      c.turns++;
      if (!turn.answer.empty()) {
        c.with_answer++;
        if (turn.turn_index > 1) c.with_answer_non_first++;
      }
    }
  }
  return c;
}

std::optional<size_t> EmbeddingTable::row_of(const std::string& id) const {
  if (row_index_.empty() && !ids.empty()) {
    for (size_t i = 0; i < ids.size(); i++) row_index_[ids[i]] = i;
  }
  auto it = row_index_.find(id);
  if (it == row_index_.end()) return std::nullopt;
  return it->second;
}

const std::string& PassageCorpus::text_of(const std::string& passage_id) const {
  auto it = passages.find(passage_id);
  if (it == passages.end())
    throw ValidationError("unknown passage id: " + passage_id);
  return it->second;
}

QueryPolicy parse_policy(const std::string& tag) {
  if (tag == "qrecc") return QueryPolicy::Qrecc;
  if (tag == "topiocqa") return QueryPolicy::Topiocqa;
  if (tag == "doc2dial" || tag == "doc2dial-like") return QueryPolicy::Doc2dialLike;
  throw ValidationError("unknown dataset policy: " + tag +
                        " (expected qrecc, topiocqa, or doc2dial)");
}

std::string policy_name(QueryPolicy policy) {
  switch (policy) {
    case QueryPolicy::Qrecc: return "qrecc";
    case QueryPolicy::Topiocqa: return "topiocqa";
    case QueryPolicy::Doc2dialLike: return "doc2dial";
  }
  return "?";
}

namespace {

Turn turn_from_json(const json& j, const std::string& where) {
  Turn t;
  try {
    t.turn_index = j.at("turn_index").get<int>();
    t.question = j.at("question").get<std::string>();
    t.answer = j.value("answer", std::string());
    if (j.contains("human_rewrite") && !j["human_rewrite"].is_null())
      t.human_rewrite = j["human_rewrite"].get<std::string>();
    if (j.contains("gold_passage_ids") && !j["gold_passage_ids"].is_null())
      t.gold_passage_ids = j["gold_passage_ids"].get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw ValidationError(where + ": bad turn record: " + e.what());
  }
  return t;
}

}  // namespace

ConversationSet load_conversations(const std::filesystem::path& path) {
  ConversationSet set;
  io::for_each_jsonl(path, [&](size_t line_no, const json& j) {
    const std::string where = path.string() + ":" + std::to_string(line_no);
    Conversation conv;
    try {
      conv.conversation_id = j.at("conversation_id").get<std::string>();
      for (const auto& tj : j.at("turns")) conv.turns.push_back(turn_from_json(tj, where));
    } catch (const json::exception& e) {
      throw ValidationError(where + ": bad conversation record: " + e.what());
    }
    try {
      set.add(std::move(conv));
    } catch (const ValidationError& e) {
      throw ValidationError(where + ": " + e.what());
    }
  });
  return set;
}

void save_conversations(const ConversationSet& set, const std::filesystem::path& path) {
  std::string out;
  for (const auto& conv : set.conversations()) {
    json j;
    j["conversation_id"] = conv.conversation_id;
    j["turns"] = json::array();
    for (const auto& t : conv.turns) {
      json tj;
      tj["turn_index"] = t.turn_index;
      tj["question"] = t.question;
      tj["answer"] = t.answer;
      if (t.human_rewrite) tj["human_rewrite"] = *t.human_rewrite;
      if (t.gold_passage_ids) tj["gold_passage_ids"] = *t.gold_passage_ids;
      j["turns"].push_back(std::move(tj));
    }
    out += j.dump();
    out += '\n';
  }
  io::write_file_atomic(path, out);
}

PassageCorpus load_passages(const std::filesystem::path& path) {
  PassageCorpus corpus;
  io::for_each_jsonl(path, [&](size_t line_no, const json& j) {
    const std::string where = path.string() + ":" + std::to_string(line_no);
    std::string id, text;
    try {
      id = j.at("id").get<std::string>();
      text = j.at("text").get<std::string>();
    } catch (const json::exception& e) {
      throw ValidationError(where + ": bad passage record: " + e.what());
    }
    if (id.empty()) throw ValidationError(where + ": empty passage id");
    if (!corpus.passages.emplace(id, std::move(text)).second)
      throw ValidationError(where + ": duplicate passage id: " + id);
  });
  return corpus;
}

namespace {

constexpr char kEmbeddingMagic[8] = {'A', 'D', 'Q', 'R', 'E', 'M', 'B', '1'};

uint32_t read_u32_le(const char* p) {
  uint32_t v;
  std::memcpy(&v, p, 4);
  return v;  // little-endian host assumed; asserted at build time below
}

static_assert(std::endian::native == std::endian::little,
              "embedding file I/O assumes a little-endian host");

}  // namespace

EmbeddingTable load_embeddings(const std::filesystem::path& bin_path,
                               const std::filesystem::path& ids_path) {
  std::string bytes = io::read_file(bin_path);
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kEmbeddingMagic, 8) != 0)
    throw ValidationError(bin_path.string() + ": not an embedding file (bad magic)");
  EmbeddingTable table;
  uint32_t count = read_u32_le(bytes.data() + 8);
  table.dim = read_u32_le(bytes.data() + 12);
  if (table.dim == 0) throw ValidationError(bin_path.string() + ": zero embedding dimension");
  size_t expected = 16 + static_cast<size_t>(count) * table.dim * sizeof(float);
  if (bytes.size() != expected)
    throw ValidationError(bin_path.string() + ": truncated embedding file (expected " +
                          std::to_string(expected) + " bytes, got " +
                          std::to_string(bytes.size()) + ")");
  table.data.resize(static_cast<size_t>(count) * table.dim);
  std::memcpy(table.data.data(), bytes.data() + 16, table.data.size() * sizeof(float));

  std::ifstream ids_in(ids_path);
  if (!ids_in) throw IoError("cannot open sidecar id list: " + ids_path.string());
  std::string line;
  while (std::getline(ids_in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    table.ids.push_back(line);
  }
  if (table.ids.size() != count)
    throw ValidationError(ids_path.string() + ": id count " + std::to_string(table.ids.size()) +
                          " does not match embedding count " + std::to_string(count));
  return table;
}

void save_embeddings(const EmbeddingTable& table, const std::filesystem::path& bin_path,
                     const std::filesystem::path& ids_path) {
  if (table.ids.size() * table.dim != table.data.size())
    throw ValidationError("embedding table shape mismatch");
  std::string bytes(16, '\0');
  std::memcpy(bytes.data(), kEmbeddingMagic, 8);
  uint32_t count = static_cast<uint32_t>(table.ids.size());
  uint32_t dim = static_cast<uint32_t>(table.dim);
  std::memcpy(bytes.data() + 8, &count, 4);
  std::memcpy(bytes.data() + 12, &dim, 4);
  size_t payload = table.data.size() * sizeof(float);
  bytes.resize(16 + payload);
  std::memcpy(bytes.data() + 16, table.data.data(), payload);
  io::write_file_atomic(bin_path, bytes);

  std::string ids_out;
  for (const auto& id : table.ids) {
    ids_out += id;
    ids_out += '\n';
  }
  io::write_file_atomic(ids_path, ids_out);
}

void attach_embeddings(PassageCorpus& corpus, EmbeddingTable table) {
  for (const auto& id : table.ids)
    if (corpus.passages.count(id) == 0)
      throw ValidationError("embedded passage id not in corpus: " + id);
  corpus.embeddings = std::move(table);
}

CandidateSet load_candidates(const std::filesystem::path& path) {
  CandidateSet cands;
  io::for_each_jsonl(path, [&](size_t line_no, const json& j) {
    const std::string where = path.string() + ":" + std::to_string(line_no);
    TurnKey key;
    std::vector<std::string> texts;
    try {
      key.conversation_id = j.at("conversation_id").get<std::string>();
      key.turn_index = j.at("turn_index").get<int>();
      texts = j.at("candidates").get<std::vector<std::string>>();
    } catch (const json::exception& e) {
      throw ValidationError(where + ": bad candidate record: " + e.what());
    }
    if (texts.empty()) throw ValidationError(where + ": candidate list is empty");
    if (!cands.entries.emplace(key, std::move(texts)).second)
      throw ValidationError(where + ": duplicate candidate entry for " + key.str());
  });
  return cands;
}

void validate_gold_ids(const ConversationSet& set, const PassageCorpus& corpus) {
  for (const auto& conv : set.conversations())
    for (const auto& turn : conv.turns)
      if (turn.gold_passage_ids)
        for (const auto& gid : *turn.gold_passage_ids)
          if (corpus.passages.count(gid) == 0)
            throw ValidationError("conversation " + conv.conversation_id + " turn " +
                                  std::to_string(turn.turn_index) +
                                  ": gold passage id not in corpus: " + gid);
}

std::string serialize_history(const Conversation& conv, int turn_index) {
  if (turn_index < 1 || turn_index > static_cast<int>(conv.turns.size()))
    throw ValidationError("turn_index " + std::to_string(turn_index) +
                          " out of range for conversation " + conv.conversation_id);
  std::string out = "[";
  for (int i = 0; i + 1 < turn_index; i++) {
    const Turn& t = conv.turns[static_cast<size_t>(i)];
    if (i > 0) out += ' ';
    out += "Q: " + t.question + " A: " + t.answer;
  }
  out += "]\nQuestion: ";
  out += conv.turns[static_cast<size_t>(turn_index) - 1].question;
  return out;
}

ResolvedQuery resolve_query(const Conversation& conv, int turn_index, QueryPolicy policy,
                            const std::string& rewrite_under_eval) {
  if (turn_index < 1 || turn_index > static_cast<int>(conv.turns.size()))
    throw ValidationError("turn_index " + std::to_string(turn_index) +
                          " out of range for conversation " + conv.conversation_id);
  const Turn& turn = conv.turns[static_cast<size_t>(turn_index) - 1];
  if (turn_index == 1) {
    switch (policy) {
      case QueryPolicy::Qrecc:
        if (!turn.human_rewrite || turn.human_rewrite->empty())
          throw ValidationError("conversation " + conv.conversation_id +
                                " turn 1: qrecc policy requires a human rewrite");
        return {true, *turn.human_rewrite};
      case QueryPolicy::Topiocqa:
        return {true, turn.question};
      case QueryPolicy::Doc2dialLike:
        return {false, ""};
    }
  }
  if (rewrite_under_eval.empty())
    throw ValidationError("conversation " + conv.conversation_id + " turn " +
                          std::to_string(turn_index) + ": no rewrite supplied for evaluation");
  return {true, rewrite_under_eval};
}

}  // namespace adaqr
