#include "adaqr/fixture.hpp"

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "adaqr/corpus.hpp"
#include "adaqr/eval.hpp"
#include "adaqr/io.hpp"
#include "adaqr/text.hpp"

namespace adaqr::fixture {

using nlohmann::json;

namespace {

constexpr int kPassages = 50;
constexpr int kConversations = 10;
constexpr int kTurns = 3;
constexpr size_t kEmbeddingDim = 16;

std::string passage_id(int i) {
  char buf[8];
  std::snprintf(buf, sizeof(buf), "p%02d", i);
  return buf;
}

std::string passage_text(int i) {
  std::string n = std::to_string(i);
  return "kw" + n + " article kw" + n + " covers alpha" + n + " beta" + n + " gamma" + n +
         " with common notes entry";
}

std::string answer_for(int gold) {
  std::string n = std::to_string(gold);
  return "alpha" + n + " beta" + n + " gamma" + n;
}

// Gold passage per (conversation, turn): passages 0..29 are golds, the rest
// distractors. Odd conversations shift topic on turn 3, even ones stay.
int gold_of(int conv, int turn) {
  int base = 3 * conv;
  if (turn == 1) return base;
  if (turn == 2) return base + 1;
  return conv % 2 == 0 ? base + 1 : base + 2;
}

int distractor_of(int conv, int turn) { return 30 + (3 * conv + turn) % 20; }

// Deterministic stand-in for an external embedder: hashed bag of words,
// L2-normalized.
std::vector<float> hash_embedding(const std::string& body) {
  std::vector<float> v(kEmbeddingDim, 0.0f);
  for (const std::string& token : text::tokenize(body))
    v[io::fnv1a64(token) % kEmbeddingDim] += 1.0f;
  double norm = 0.0;
  for (float x : v) norm += static_cast<double>(x) * x;
  if (norm > 0.0) {
    float inv = static_cast<float>(1.0 / std::sqrt(norm));
    for (float& x : v) x *= inv;
  }
  return v;
}

}  // namespace

FixturePaths write_fixture(const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  FixturePaths paths;
  paths.conversations = dir / "conversations.jsonl";
  paths.passages = dir / "passages.jsonl";
  paths.candidates = dir / "candidates.jsonl";
  paths.qrels = dir / "qrels.trec";
  paths.embeddings = dir / "embeddings.bin";
  paths.embedding_ids = dir / "embeddings.bin.ids";
  paths.query_embeddings = dir / "query_embeddings.bin";
  paths.query_embedding_ids = dir / "query_embeddings.bin.ids";
  paths.config = dir / "config.adaqr";

  // passages
  std::string passages_out;
  for (int i = 0; i < kPassages; i++) {
    json j;
    j["id"] = passage_id(i);
    j["text"] = passage_text(i);
    passages_out += j.dump();
    passages_out += '\n';
  }
  io::write_file_atomic(paths.passages, passages_out);

  // conversations + qrels
  std::string conv_out;
  Qrels qrels;
  for (int c = 0; c < kConversations; c++) {
    std::string cid = "c" + std::to_string(c + 1);
    json turns = json::array();
    for (int t = 1; t <= kTurns; t++) {
      int g = gold_of(c, t);
      json turn;
      turn["turn_index"] = t;
      if (t == 1)
        turn["question"] = "what does article kw" + std::to_string(g) + " cover";
      else if (t == 2)
        turn["question"] = "and which facts follow from that";
      else
        turn["question"] = "anything more on the same subject";
      turn["answer"] = answer_for(g);
      turn["human_rewrite"] = "facts covered by article kw" + std::to_string(g);
      turn["gold_passage_ids"] = json::array({passage_id(g)});
      turns.push_back(std::move(turn));
      qrels.grades[cid + "_" + std::to_string(t)][passage_id(g)] = 1;
    }
    json j;
    j["conversation_id"] = cid;
    j["turns"] = std::move(turns);
    conv_out += j.dump();
    conv_out += '\n';
  }
  io::write_file_atomic(paths.conversations, conv_out);
  save_qrels(qrels, paths.qrels);

  // candidates for trainable turns (non-first, with answers): strong, weak,
  // and off-topic rewrites
  std::string cand_out;
  std::vector<std::pair<std::string, std::string>> query_texts;  // (query id, text)
  for (int c = 0; c < kConversations; c++) {
    std::string cid = "c" + std::to_string(c + 1);
    for (int t = 2; t <= kTurns; t++) {
      int g = gold_of(c, t);
      int d = distractor_of(c, t);
      std::vector<std::string> cands = {
          "kw" + std::to_string(g) + " alpha" + std::to_string(g) + " beta" + std::to_string(g),
          "kw" + std::to_string(g) + " common notes",
          "kw" + std::to_string(d) + " alpha" + std::to_string(d),
      };
      json j;
      j["conversation_id"] = cid;
      j["turn_index"] = t;
      j["candidates"] = cands;
      cand_out += j.dump();
      cand_out += '\n';
      std::string tkey = cid + "_" + std::to_string(t);
      for (size_t i = 0; i < cands.size(); i++)
        query_texts.emplace_back(tkey + "_" + std::to_string(i), cands[i]);
    }
    // evaluation queries: turn 1 resolves to the question under the
    // topiocqa policy, later turns to the human rewrite
    for (int t = 1; t <= kTurns; t++) {
      int g = gold_of(c, t);
      std::string text = t == 1 ? "what does article kw" + std::to_string(g) + " cover"
                                : "facts covered by article kw" + std::to_string(g);
      query_texts.emplace_back(cid + "_" + std::to_string(t), text);
    }
  }
  io::write_file_atomic(paths.candidates, cand_out);

  // passage embeddings
  EmbeddingTable passage_table;
  passage_table.dim = kEmbeddingDim;
  for (int i = 0; i < kPassages; i++) {
    passage_table.ids.push_back(passage_id(i));
    std::vector<float> v = hash_embedding(passage_text(i));
    passage_table.data.insert(passage_table.data.end(), v.begin(), v.end());
  }
  save_embeddings(passage_table, paths.embeddings, paths.embedding_ids);

  // query embeddings (candidates and evaluation queries)
  EmbeddingTable query_table;
  query_table.dim = kEmbeddingDim;
  for (const auto& [qid, body] : query_texts) {
    query_table.ids.push_back(qid);
    std::vector<float> v = hash_embedding(body);
    query_table.data.insert(query_table.data.end(), v.begin(), v.end());
  }
  save_embeddings(query_table, paths.query_embeddings, paths.query_embedding_ids);

  // ready-to-run config
  std::string config_out =
      "# synthetic fixture pipeline config\n"
      "policy = topiocqa\n"
      "conversations = conversations.jsonl\n"
      "passages = passages.jsonl\n"
      "candidates = candidates.jsonl\n"
      "qrels = qrels.trec\n"
      "embeddings = embeddings.bin\n"
      "query_embeddings = query_embeddings.bin\n"
      "workdir = work\n"
      "retriever = sparse\n"
      "top_k = 5\n"
      "retrieve_depth = 100\n"
      "scorer_endpoint = mock\n"
      "scorer_parallelism = 4\n"
      "reward_method = marginal\n"
      "delta = 0.1\n"
      "pair_mode = all\n"
      "beta = 0.1\n"
      "toy_learning_rate = 0.5\n"
      "toy_epochs = 20\n"
      "metric_ks = 1,5,10\n"
      "seed = 7\n";
  io::write_file_atomic(paths.config, config_out);
  return paths;
}

}  // namespace adaqr::fixture
