#include "adaqr/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "adaqr/bm25.hpp"
#include "adaqr/corpus.hpp"
#include "adaqr/dense.hpp"
#include "adaqr/error.hpp"
#include "adaqr/eval.hpp"
#include "adaqr/io.hpp"
#include "adaqr/pairs.hpp"
#include "adaqr/ranked_list.hpp"
#include "adaqr/reward.hpp"
#include "adaqr/scorer.hpp"
#include "adaqr/trainer.hpp"

namespace adaqr {

using nlohmann::json;

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ValidationError("config key " + key + ": expected a boolean, got '" + v + "'");
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& value) {
  std::filesystem::path p(value);
  if (p.is_absolute() || base.empty()) return p;
  return base / p;
}

}  // namespace

void set_config_key(PipelineConfig& c, const std::string& key, const std::string& value,
                    const std::filesystem::path& base_dir) {
  auto num = [&](const char* name) {
    try {
      return std::stod(value);
    } catch (const std::exception&) {
      throw ValidationError(std::string("config key ") + name + ": expected a number, got '" +
                            value + "'");
    }
  };
  auto integer = [&](const char* name) {
    try {
      return std::stoi(value);
    } catch (const std::exception&) {
      throw ValidationError(std::string("config key ") + name + ": expected an integer, got '" +
                            value + "'");
    }
  };

  if (key == "policy") c.policy = value;
  else if (key == "conversations") c.conversations = resolve(base_dir, value);
  else if (key == "passages") c.passages = resolve(base_dir, value);
  else if (key == "candidates") c.candidates = resolve(base_dir, value);
  else if (key == "qrels") c.qrels = resolve(base_dir, value);
  else if (key == "embeddings") c.embeddings = resolve(base_dir, value);
  else if (key == "embedding_ids") c.embedding_ids = resolve(base_dir, value);
  else if (key == "query_embeddings") c.query_embeddings = resolve(base_dir, value);
  else if (key == "query_embedding_ids") c.query_embedding_ids = resolve(base_dir, value);
  else if (key == "workdir") c.workdir = resolve(base_dir, value);
  else if (key == "retriever") c.retriever = value;
  else if (key == "bm25_k1") c.bm25_k1 = num("bm25_k1");
  else if (key == "bm25_b") c.bm25_b = num("bm25_b");
  else if (key == "stem") c.stem = parse_bool(value, key);
  else if (key == "retrieve_depth") c.retrieve_depth = integer("retrieve_depth");
  else if (key == "top_k") c.top_k = integer("top_k");
  else if (key == "softmax_temperature") c.softmax_temperature = num("softmax_temperature");
  else if (key == "scorer_endpoint") c.scorer_endpoint = value;
  else if (key == "scorer_parallelism") c.scorer_parallelism = integer("scorer_parallelism");
  else if (key == "scorer_retries") c.scorer_retries = integer("scorer_retries");
  else if (key == "scorer_timeout_ms") c.scorer_timeout_ms = integer("scorer_timeout_ms");
  else if (key == "scorer_normalize") c.scorer_normalize = parse_bool(value, key);
  else if (key == "score_top_k") c.score_top_k = integer("score_top_k");
  else if (key == "reward_method") c.reward_method = value;
  else if (key == "pseudo_depth") c.pseudo_depth = integer("pseudo_depth");
  else if (key == "delta") c.delta = num("delta");
  else if (key == "pair_mode") c.pair_mode = value;
  else if (key == "pair_fraction") c.pair_fraction = num("pair_fraction");
  else if (key == "beta") c.beta = num("beta");
  else if (key == "toy_learning_rate") c.toy_learning_rate = num("toy_learning_rate");
  else if (key == "toy_epochs") c.toy_epochs = integer("toy_epochs");
  else if (key == "warmup_fraction") c.warmup_fraction = num("warmup_fraction");
  else if (key == "ndcg_cutoff") c.ndcg_cutoff = integer("ndcg_cutoff");
  else if (key == "eval_rewrite_source") c.eval_rewrite_source = value;
  else if (key == "include_first_turns") c.include_first_turns = value;
  else if (key == "seed") c.seed = static_cast<uint64_t>(std::stoull(value));
  else if (key == "run_tag") c.run_tag = value;
  else if (key == "metric_ks") {
    c.metric_ks.clear();
    std::istringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (item.empty()) continue;
      try {
        c.metric_ks.push_back(std::stoi(item));
      } catch (const std::exception&) {
        throw ValidationError("config key metric_ks: bad cutoff '" + item + "'");
      }
    }
    if (c.metric_ks.empty()) throw ValidationError("config key metric_ks: no cutoffs");
  } else {
    throw ValidationError("unknown config key: " + key);
  }
}

PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path.string());
  PipelineConfig config;
  std::filesystem::path base = path.parent_path();
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    line_no++;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                            ": expected 'key = value'");
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    try {
      set_config_key(config, key, value, base);
    } catch (const ValidationError& e) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return config;
}

Stage parse_stage(const std::string& name) {
  if (name == "index") return Stage::Index;
  if (name == "retrieve") return Stage::Retrieve;
  if (name == "score") return Stage::Score;
  if (name == "reward") return Stage::Reward;
  if (name == "pairs") return Stage::Pairs;
  if (name == "export") return Stage::Export;
  if (name == "train-toy" || name == "train_toy") return Stage::TrainToy;
  if (name == "eval") return Stage::Eval;
  if (name == "report") return Stage::Report;
  throw ValidationError("unknown stage: " + name);
}

std::string stage_name(Stage stage) {
  switch (stage) {
    case Stage::Index: return "index";
    case Stage::Retrieve: return "retrieve";
    case Stage::Score: return "score";
    case Stage::Reward: return "reward";
    case Stage::Pairs: return "pairs";
    case Stage::Export: return "export";
    case Stage::TrainToy: return "train-toy";
    case Stage::Eval: return "eval";
    case Stage::Report: return "report";
  }
  return "?";
}

std::vector<Stage> all_stages() {
  return {Stage::Index, Stage::Retrieve, Stage::Score,    Stage::Reward, Stage::Pairs,
          Stage::Export, Stage::TrainToy, Stage::Eval, Stage::Report};
}

namespace {

struct StageIo {
  std::vector<std::filesystem::path> inputs;
  std::vector<std::filesystem::path> outputs;
  std::string config_fingerprint;
};

void require_input(const std::filesystem::path& path, const std::string& what,
                   const std::string& producing_stage) {
  if (path.empty())
    throw ValidationError(what + " is not configured");
  if (!std::filesystem::exists(path)) {
    if (producing_stage.empty())
      throw ValidationError(what + " not found: " + path.string());
    throw ValidationError(what + " not found: " + path.string() + "; run the '" +
                          producing_stage + "' stage first");
  }
}

std::filesystem::path embedding_ids_path(const std::filesystem::path& bin,
                                         const std::filesystem::path& explicit_ids) {
  if (!explicit_ids.empty()) return explicit_ids;
  std::filesystem::path p = bin;
  p += ".ids";
  return p;
}

bool first_turns_included(const PipelineConfig& config) {
  if (config.include_first_turns == "auto")
    return parse_policy(config.policy) != QueryPolicy::Doc2dialLike;
  return parse_bool(config.include_first_turns, "include_first_turns");
}

Bm25Params effective_bm25(const PipelineConfig& config) {
  Bm25Params params = Bm25Params::for_policy(parse_policy(config.policy));
  if (config.bm25_k1 >= 0.0) params.k1 = config.bm25_k1;
  if (config.bm25_b >= 0.0) params.b = config.bm25_b;
  return params;
}

int effective_score_top_k(const PipelineConfig& config) {
  return config.score_top_k > 0 ? config.score_top_k : config.top_k;
}

std::unique_ptr<ScorerBackend> make_backend(const PipelineConfig& config) {
  if (config.scorer_endpoint == "mock") return std::make_unique<MockScorer>();
  HttpScorerConfig http;
  http.endpoint = config.scorer_endpoint;
  http.timeout_ms = config.scorer_timeout_ms;
  http.max_retries = config.scorer_retries;
  if (const char* token = std::getenv("ADAQR_SCORER_TOKEN")) http.bearer_token = token;
  return std::make_unique<HttpScorer>(http);
}

// Gold passage ids for a turn: inline labels first, qrels fallback.
std::set<std::string> gold_for(const Turn& turn, const TurnKey& key, const Qrels* qrels) {
  if (turn.gold_passage_ids)
    return {turn.gold_passage_ids->begin(), turn.gold_passage_ids->end()};
  if (qrels != nullptr) return qrels->positives(key.str());
  return {};
}

// Turns eligible for reward collection: has candidates, non-empty answer,
// not a first turn.
std::vector<std::pair<TurnKey, const Turn*>> training_instances(
    const ConversationSet& conversations, const CandidateSet& candidates) {
  std::vector<std::pair<TurnKey, const Turn*>> out;
  for (const auto& [key, texts] : candidates.entries) {
    const Turn* turn = conversations.find_turn(key);
    if (turn == nullptr)
      throw ValidationError("candidates reference unknown turn " + key.str());
    if (turn->turn_index <= 1) continue;
    if (turn->answer.empty()) continue;
    out.emplace_back(key, turn);
  }
  return out;
}

class QueryVectors {
 public:
  QueryVectors(const PipelineConfig& config, bool needed) {
    if (!needed) return;
    if (config.query_embeddings.empty())
      throw ValidationError("dense retriever requires query_embeddings (ingested vectors)");
    table_ = load_embeddings(
        config.query_embeddings,
        embedding_ids_path(config.query_embeddings, config.query_embedding_ids));
  }

  std::span<const float> vector_for(const std::string& query_id) const {
    auto row = table_.row_of(query_id);
    if (!row)
      throw ValidationError("no ingested query vector for id " + query_id);
    return {table_.vector_for(*row), table_.dim};
  }

 private:
  EmbeddingTable table_;
};

// --- stage bodies ---

void stage_index(const PipelineConfig& config) {
  if (config.retriever == "sparse") {
    PassageCorpus corpus = load_passages(config.passages);
    Bm25Index index = Bm25Index::build(corpus, effective_bm25(config), {config.stem});
    index.save(config.index_path());
    std::cout << "index: " << index.doc_count() << " passages, avgdl " << index.avg_doc_len()
              << "\n";
  } else if (config.retriever == "dense") {
    EmbeddingTable table = load_embeddings(
        config.embeddings, embedding_ids_path(config.embeddings, config.embedding_ids));
    DenseIndex index = DenseIndex::build(table);
    index.save(config.index_path());
    std::cout << "index: " << index.doc_count() << " vectors, dim " << index.dim() << "\n";
  } else {
    throw ValidationError("unknown retriever: " + config.retriever);
  }
}

void stage_retrieve(const PipelineConfig& config) {
  ConversationSet conversations = load_conversations(config.conversations);
  CandidateSet candidates = load_candidates(config.candidates);
  QueryPolicy policy = parse_policy(config.policy);

  bool dense = config.retriever == "dense";
  Bm25Index sparse_index;
  DenseIndex dense_index;
  if (dense)
    dense_index = DenseIndex::load(config.index_path());
  else
    sparse_index = Bm25Index::load(config.index_path());
  QueryVectors query_vectors(config, dense);

  auto search = [&](const std::string& text, const std::string& query_id) {
    if (dense)
      return dense_index.search(query_vectors.vector_for(query_id), config.retrieve_depth,
                                query_id);
    return sparse_index.search(text, config.retrieve_depth, query_id);
  };

  std::vector<RankedList> candidate_run;
  size_t empty_results = 0;
  for (const auto& [key, turn] : training_instances(conversations, candidates)) {
    const auto& texts = candidates.entries.at(key);
    for (size_t i = 0; i < texts.size(); i++) {
      CandidateKey ckey{key.conversation_id, key.turn_index, static_cast<int>(i)};
      RankedList list = search(texts[i], ckey.str());
      if (list.entries.empty()) {
        empty_results++;  // candidate skipped downstream
        continue;
      }
      candidate_run.push_back(std::move(list));
    }
  }
  write_trec_run(candidate_run, config.candidate_run_path(), config.run_tag);

  Qrels qrels;
  bool have_qrels = !config.qrels.empty() && std::filesystem::exists(config.qrels);
  if (have_qrels) qrels = load_qrels(config.qrels);

  std::vector<RankedList> eval_run;
  size_t unresolved = 0;
  bool with_first = first_turns_included(config);
  for (const Conversation& conv : conversations.conversations()) {
    for (const Turn& turn : conv.turns) {
      if (turn.turn_index == 1 && !with_first) continue;
      TurnKey key{conv.conversation_id, turn.turn_index};
      std::set<std::string> gold = gold_for(turn, key, have_qrels ? &qrels : nullptr);
      if (gold.empty()) continue;  // nothing to evaluate against
      std::string rewrite;
      if (turn.turn_index > 1) {
        if (config.eval_rewrite_source == "question") {
          rewrite = turn.question;
        } else if (config.eval_rewrite_source == "human") {
          if (!turn.human_rewrite || turn.human_rewrite->empty()) {
            unresolved++;
            continue;
          }
          rewrite = *turn.human_rewrite;
        } else {
          throw ValidationError("unknown eval_rewrite_source: " + config.eval_rewrite_source);
        }
      }
      ResolvedQuery query = resolve_query(conv, turn.turn_index, policy, rewrite);
      if (!query.included) continue;
      RankedList list = search(query.text, key.str());
      if (!list.entries.empty()) eval_run.push_back(std::move(list));
    }
  }
  write_trec_run(eval_run, config.eval_run_path(), config.run_tag);
  std::cout << "retrieve: " << candidate_run.size() << " candidate lists ("
            << empty_results << " empty), " << eval_run.size() << " evaluation lists ("
            << unresolved << " without rewrite)\n";
}

void stage_score(const PipelineConfig& config) {
  require_input(config.candidate_run_path(), "candidate run", "retrieve");
  ConversationSet conversations = load_conversations(config.conversations);
  PassageCorpus corpus = load_passages(config.passages);
  std::vector<RankedList> run = read_trec_run(config.candidate_run_path());
  std::unique_ptr<ScorerBackend> backend = make_backend(config);
  int score_k = effective_score_top_k(config);

  // One scoring request per distinct (turn, passage): candidates of a
  // turn share context and answer, so overlapping passages are scored once.
  struct TurnWork {
    const Conversation* conv = nullptr;
    const Turn* turn = nullptr;
    std::map<std::string, size_t> request_of_passage;
  };
  std::map<TurnKey, TurnWork> work;
  std::vector<ScoringRequest> requests;

  struct CandidateRow {
    CandidateKey key;
    std::string passage_id;
    size_t request = 0;
  };
  std::vector<CandidateRow> rows;

  for (const RankedList& list : run) {
    // query id is "{conv}_{turn}_{cand}"; split from the right
    const std::string& qid = list.query_id;
    size_t p2 = qid.rfind('_');
    size_t p1 = p2 == std::string::npos ? std::string::npos : qid.rfind('_', p2 - 1);
    if (p1 == std::string::npos)
      throw ValidationError("bad candidate query id in run: " + qid);
    CandidateKey ckey;
    ckey.conversation_id = qid.substr(0, p1);
    try {
      ckey.turn_index = std::stoi(qid.substr(p1 + 1, p2 - p1 - 1));
      ckey.candidate_index = std::stoi(qid.substr(p2 + 1));
    } catch (const std::exception&) {
      throw ValidationError("bad candidate query id in run: " + qid);
    }
    TurnKey tkey{ckey.conversation_id, ckey.turn_index};
    TurnWork& tw = work[tkey];
    if (tw.turn == nullptr) {
      tw.conv = conversations.find(tkey.conversation_id);
      tw.turn = conversations.find_turn(tkey);
      if (tw.conv == nullptr || tw.turn == nullptr)
        throw ValidationError("run references unknown turn " + tkey.str());
      if (tw.turn->answer.empty())
        throw ValidationError("turn " + tkey.str() + " has no answer to score");
    }
    size_t n = std::min(static_cast<size_t>(score_k), list.entries.size());
    for (size_t i = 0; i < n; i++) {
      const std::string& pid = list.entries[i].passage_id;
      auto [it, inserted] = tw.request_of_passage.emplace(pid, requests.size());
      if (inserted) {
        requests.push_back(ScoringRequest{
            serialize_history(*tw.conv, tkey.turn_index), corpus.text_of(pid),
            tw.turn->answer});
      }
      rows.push_back(CandidateRow{ckey, pid, it->second});
    }
  }

  std::vector<double> values = score_batch(*backend, requests, config.scorer_parallelism);
  if (config.scorer_normalize)
    for (size_t i = 0; i < values.size(); i++)
      values[i] = length_normalized(values[i], requests[i].answer);

  std::string out;
  for (const CandidateRow& row : rows) {
    json j;
    j["conversation_id"] = row.key.conversation_id;
    j["turn_index"] = row.key.turn_index;
    j["candidate_index"] = row.key.candidate_index;
    j["passage_id"] = row.passage_id;
    j["logprob"] = values[row.request];
    j["backend"] = backend->tag();
    out += j.dump();
    out += '\n';
  }
  io::write_file_atomic(config.scores_path(), out);
  std::cout << "score: " << requests.size() << " requests for " << rows.size()
            << " (candidate, passage) pairs\n";
}

std::vector<ScoreRecord> load_scores(const std::filesystem::path& path) {
  std::vector<ScoreRecord> scores;
  io::for_each_jsonl(path, [&](size_t line_no, const json& j) {
    const std::string where = path.string() + ":" + std::to_string(line_no);
    ScoreRecord r;
    try {
      r.key.conversation_id = j.at("conversation_id").get<std::string>();
      r.key.turn_index = j.at("turn_index").get<int>();
      r.key.candidate_index = j.at("candidate_index").get<int>();
      r.passage_id = j.at("passage_id").get<std::string>();
      r.logprob = j.at("logprob").get<double>();
      r.backend = j.value("backend", std::string());
    } catch (const json::exception& e) {
      throw ValidationError(where + ": bad score record: " + e.what());
    }
    if (!std::isfinite(r.logprob))
      throw ValidationError(where + ": non-finite logprob");
    scores.push_back(std::move(r));
  });
  return scores;
}

void stage_reward(const PipelineConfig& config) {
  require_input(config.candidate_run_path(), "candidate run", "retrieve");
  RewardMethod method = parse_reward_method(config.reward_method);
  ConversationSet conversations = load_conversations(config.conversations);
  std::vector<RankedList> run = read_trec_run(config.candidate_run_path());

  std::map<CandidateKey, std::vector<ScoreRecord>> scores_by_candidate;
  if (method == RewardMethod::Marginal) {
    require_input(config.scores_path(), "score file", "score");
    for (ScoreRecord& r : load_scores(config.scores_path()))
      scores_by_candidate[r.key].push_back(std::move(r));
  }

  PassageCorpus corpus;
  if (method == RewardMethod::PseudoLabel || method == RewardMethod::Concat)
    corpus = load_passages(config.passages);

  Qrels qrels;
  bool have_qrels = !config.qrels.empty() && std::filesystem::exists(config.qrels);
  if (have_qrels) qrels = load_qrels(config.qrels);

  std::unique_ptr<ScorerBackend> backend;
  if (method == RewardMethod::Concat) backend = make_backend(config);

  std::vector<RewardRecord> rewards;
  size_t skipped = 0;
  for (const RankedList& list : run) {
    const std::string& qid = list.query_id;
    size_t p2 = qid.rfind('_');
    size_t p1 = p2 == std::string::npos ? std::string::npos : qid.rfind('_', p2 - 1);
    if (p1 == std::string::npos)
      throw ValidationError("bad candidate query id in run: " + qid);
    CandidateKey ckey;
    ckey.conversation_id = qid.substr(0, p1);
    ckey.turn_index = std::stoi(qid.substr(p1 + 1, p2 - p1 - 1));
    ckey.candidate_index = std::stoi(qid.substr(p2 + 1));
    TurnKey tkey{ckey.conversation_id, ckey.turn_index};
    const Turn* turn = conversations.find_turn(tkey);
    if (turn == nullptr) throw ValidationError("run references unknown turn " + tkey.str());

    switch (method) {
      case RewardMethod::Marginal: {
        RetrievalDistribution dist =
            retrieval_distribution(list, config.top_k, config.softmax_temperature);
        auto it = scores_by_candidate.find(ckey);
        if (it == scores_by_candidate.end())
          throw ValidationError("no scores for candidate " + ckey.str() +
                                "; re-run the score stage");
        std::map<std::string, const ScoreRecord*> by_passage;
        for (const ScoreRecord& r : it->second) by_passage[r.passage_id] = &r;
        std::vector<ScoreRecord> aligned;
        for (const auto& [pid, weight] : dist.weights) {
          auto pit = by_passage.find(pid);
          if (pit == by_passage.end())
            throw ValidationError("candidate " + ckey.str() + ": passage " + pid +
                                  " retrieved but not scored; re-run the score stage");
          aligned.push_back(*pit->second);
        }
        rewards.push_back(marginal_reward(dist, aligned));
        break;
      }
      case RewardMethod::Concat: {
        const Conversation* conv = conversations.find(tkey.conversation_id);
        size_t n = std::min(static_cast<size_t>(config.top_k), list.entries.size());
        std::vector<std::string> passages;
        for (size_t i = 0; i < n; i++)
          passages.push_back(corpus.text_of(list.entries[i].passage_id));
        rewards.push_back(concat_reward(*backend, ckey,
                                        serialize_history(*conv, tkey.turn_index), passages,
                                        turn->answer));
        break;
      }
      case RewardMethod::GoldRank: {
        std::set<std::string> gold = gold_for(*turn, tkey, have_qrels ? &qrels : nullptr);
        if (gold.empty()) {
          skipped++;
          continue;
        }
        rewards.push_back(gold_rank_reward(ckey, list, gold));
        break;
      }
      case RewardMethod::PseudoLabel: {
        rewards.push_back(
            pseudo_label_reward(ckey, list, corpus, turn->answer, config.pseudo_depth));
        break;
      }
    }
  }
  save_rewards(rewards, config.rewards_path());
  std::cout << "reward: " << rewards.size() << " records (" << config.reward_method << ", K="
            << config.top_k << ", " << skipped << " skipped)\n";
}

void stage_pairs(const PipelineConfig& config) {
  require_input(config.rewards_path(), "reward file", "reward");
  ConversationSet conversations = load_conversations(config.conversations);
  CandidateSet candidates = load_candidates(config.candidates);
  PairMode mode = parse_pair_mode(config.pair_mode);

  std::map<TurnKey, std::vector<RewardRecord>> by_turn;
  for (RewardRecord& r : load_rewards(config.rewards_path()))
    by_turn[TurnKey{r.key.conversation_id, r.key.turn_index}].push_back(std::move(r));

  std::vector<PreferencePair> pairs;
  for (const auto& [key, rewards] : by_turn) {
    const Conversation* conv = conversations.find(key.conversation_id);
    if (conv == nullptr) throw ValidationError("rewards reference unknown conversation " +
                                               key.conversation_id);
    auto cit = candidates.entries.find(key);
    if (cit == candidates.entries.end())
      throw ValidationError("rewards reference turn " + key.str() + " with no candidates");
    std::string prompt = serialize_history(*conv, key.turn_index);
    std::vector<PreferencePair> instance =
        build_pairs(prompt, cit->second, rewards, config.delta, mode);
    pairs.insert(pairs.end(), instance.begin(), instance.end());
  }
  if (config.pair_fraction < 1.0)
    pairs = subset_pairs(pairs, config.pair_fraction, config.seed);
  save_pairs(pairs, config.pairs_path());
  std::cout << "pairs: " << pairs.size() << " preference pairs (delta=" << config.delta
            << ", mode=" << pair_mode_name(mode) << ")\n";
}

void stage_export(const PipelineConfig& config) {
  require_input(config.pairs_path(), "pairs file", "pairs");
  std::vector<PreferencePair> pairs = load_pairs(config.pairs_path());
  size_t written = export_dpo_dataset(pairs, config.dpo_dataset_path());
  DpoConfig dpo;
  dpo.beta = config.beta;
  dpo.learning_rate = 1e-5;  // metadata for external trainers, not the toy value
  dpo.warmup_fraction = config.warmup_fraction;
  write_training_config(config.train_config_path(), config.beta, config.delta, dpo);
  std::cout << "export: " << written << " pairs -> " << config.dpo_dataset_path().string()
            << "\n";
}

void stage_train_toy(const PipelineConfig& config) {
  require_input(config.dpo_dataset_path(), "DPO dataset", "export");
  std::vector<PreferencePair> pairs = load_dpo_dataset(config.dpo_dataset_path());
  DpoConfig dpo;
  dpo.beta = config.beta;
  dpo.learning_rate = config.toy_learning_rate;
  dpo.warmup_fraction = config.warmup_fraction;
  dpo.epochs = config.toy_epochs;
  dpo.seed = config.seed;
  TrainResult result = train_toy_policy(pairs, dpo);

  json j;
  j["pairs"] = pairs.size();
  j["beta"] = dpo.beta;
  j["learning_rate"] = dpo.learning_rate;
  j["epochs"] = dpo.epochs;
  j["warmup_fraction"] = dpo.warmup_fraction;
  j["seed"] = dpo.seed;
  j["initial_margin_fraction"] = result.log.initial_margin_fraction;
  j["final_margin_fraction"] = result.log.final_margin_fraction;
  j["epoch_mean_loss"] = result.log.epoch_mean_loss;
  io::write_file_atomic(config.toy_training_path(), j.dump(2) + "\n");
  std::cout << "train-toy: margin fraction " << result.log.initial_margin_fraction << " -> "
            << result.log.final_margin_fraction << ", final mean loss "
            << result.log.epoch_mean_loss.back() << "\n";
}

EvalOptions eval_options(const PipelineConfig& config) {
  EvalOptions options;
  options.ks = config.metric_ks;
  options.ndcg_cutoff = config.ndcg_cutoff;
  return options;
}

json metrics_to_json(const MetricReport& report) {
  json j;
  j["query_count"] = report.query_count;
  j["ndcg_cutoff"] = report.ndcg_cutoff;
  auto one = [&](const QueryMetrics& m) {
    json mj;
    mj["mrr"] = m.mrr;
    mj["map"] = m.map;
    mj["ndcg"] = m.ndcg;
    for (const auto& [k, v] : m.recall) mj["recall@" + std::to_string(k)] = v;
    return mj;
  };
  j["mean"] = one(report.mean);
  json per = json::object();
  for (const auto& [qid, m] : report.per_query) per[qid] = one(m);
  j["per_query"] = std::move(per);
  return j;
}

void stage_eval(const PipelineConfig& config) {
  require_input(config.eval_run_path(), "evaluation run", "retrieve");
  require_input(config.qrels, "qrels file", "");
  std::vector<RankedList> run = read_trec_run(config.eval_run_path());
  Qrels qrels = load_qrels(config.qrels);
  MetricReport report = evaluate_run(run, qrels, eval_options(config));
  io::write_file_atomic(config.metrics_path(), metrics_to_json(report).dump(2) + "\n");
  std::cout << "eval: " << report.query_count << " queries, MRR " << report.mean.mrr << "\n";
}

void stage_report(const PipelineConfig& config) {
  require_input(config.eval_run_path(), "evaluation run", "retrieve");
  require_input(config.qrels, "qrels file", "");
  ConversationSet conversations = load_conversations(config.conversations);
  std::vector<RankedList> run = read_trec_run(config.eval_run_path());
  Qrels qrels = load_qrels(config.qrels);

  TopicShiftSplit split = topic_shift_split(conversations, qrels);
  auto segment_qrels = [&](const std::vector<TurnKey>& keys) {
    Qrels out;
    for (const TurnKey& key : keys) {
      auto it = qrels.grades.find(key.str());
      if (it != qrels.grades.end()) out.grades[it->first] = it->second;
    }
    return out;
  };

  std::vector<std::pair<std::string, MetricReport>> rows;
  rows.emplace_back("overall", evaluate_run(run, qrels, eval_options(config)));
  auto add_segment = [&](const std::string& name, const std::vector<TurnKey>& keys) {
    Qrels seg = segment_qrels(keys);
    if (seg.grades.empty()) return;
    rows.emplace_back(name, evaluate_run(run, seg, eval_options(config)));
  };
  add_segment("initial", split.initial);
  add_segment("topic-shift", split.shift);
  add_segment("topic-concentrated", split.concentrated);

  std::ostringstream out;
  out << "retrieval report (" << config.retriever << ", policy " << config.policy << ")\n\n";
  out << render_metric_table(rows);
  out << "\nturn partition: " << split.initial.size() << " initial, " << split.shift.size()
      << " topic-shift, " << split.concentrated.size() << " topic-concentrated";
  if (split.excluded > 0) out << " (" << split.excluded << " turns without gold labels excluded)";
  out << "\n";
  io::write_file_atomic(config.report_path(), out.str());
  std::cout << out.str();
}

// --- stamps: one fingerprint of config subset + input files per stage ---

StageIo stage_io(const PipelineConfig& c, Stage stage) {
  StageIo io;
  std::ostringstream fp;
  bool dense = c.retriever == "dense";
  switch (stage) {
    case Stage::Index:
      if (dense) {
        io.inputs = {c.embeddings, embedding_ids_path(c.embeddings, c.embedding_ids)};
      } else {
        io.inputs = {c.passages};
      }
      io.outputs = {c.index_path()};
      fp << c.retriever << '|' << effective_bm25(c).k1 << '|' << effective_bm25(c).b << '|'
         << c.stem;
      break;
    case Stage::Retrieve:
      io.inputs = {c.index_path(), c.conversations, c.candidates};
      if (dense) {
        io.inputs.push_back(c.query_embeddings);
        io.inputs.push_back(embedding_ids_path(c.query_embeddings, c.query_embedding_ids));
      }
      if (!c.qrels.empty() && std::filesystem::exists(c.qrels)) io.inputs.push_back(c.qrels);
      io.outputs = {c.candidate_run_path(), c.eval_run_path()};
      fp << c.retriever << '|' << c.retrieve_depth << '|' << c.policy << '|'
         << c.eval_rewrite_source << '|' << c.include_first_turns << '|' << c.run_tag;
      break;
    case Stage::Score:
      io.inputs = {c.candidate_run_path(), c.conversations, c.passages};
      io.outputs = {c.scores_path()};
      fp << c.scorer_endpoint << '|' << effective_score_top_k(c) << '|' << c.scorer_normalize;
      break;
    case Stage::Reward:
      io.inputs = {c.candidate_run_path(), c.conversations};
      if (c.reward_method == "marginal") io.inputs.push_back(c.scores_path());
      if (c.reward_method == "pseudo" || c.reward_method == "pseudo_label" ||
          c.reward_method == "concat")
        io.inputs.push_back(c.passages);
      if ((c.reward_method == "gold" || c.reward_method == "gold_rank") && !c.qrels.empty() &&
          std::filesystem::exists(c.qrels))
        io.inputs.push_back(c.qrels);
      io.outputs = {c.rewards_path()};
      fp << c.reward_method << '|' << c.top_k << '|' << c.softmax_temperature << '|'
         << c.pseudo_depth << '|' << c.scorer_endpoint;
      break;
    case Stage::Pairs:
      io.inputs = {c.rewards_path(), c.conversations, c.candidates};
      io.outputs = {c.pairs_path()};
      fp << c.delta << '|' << c.pair_mode << '|' << c.pair_fraction << '|' << c.seed;
      break;
    case Stage::Export:
      io.inputs = {c.pairs_path()};
      io.outputs = {c.dpo_dataset_path(), c.train_config_path()};
      fp << c.beta << '|' << c.delta << '|' << c.warmup_fraction;
      break;
    case Stage::TrainToy:
      io.inputs = {c.dpo_dataset_path()};
      io.outputs = {c.toy_training_path()};
      fp << c.beta << '|' << c.toy_learning_rate << '|' << c.toy_epochs << '|'
         << c.warmup_fraction << '|' << c.seed;
      break;
    case Stage::Eval:
      io.inputs = {c.eval_run_path(), c.qrels};
      io.outputs = {c.metrics_path()};
      fp << c.ndcg_cutoff;
      for (int k : c.metric_ks) fp << ',' << k;
      break;
    case Stage::Report:
      io.inputs = {c.eval_run_path(), c.qrels, c.conversations};
      io.outputs = {c.report_path()};
      fp << c.ndcg_cutoff << '|' << c.retriever << '|' << c.policy;
      for (int k : c.metric_ks) fp << ',' << k;
      break;
  }
  io.config_fingerprint = fp.str();
  return io;
}

std::string stamp_value(Stage stage, const StageIo& io) {
  std::ostringstream out;
  out << stage_name(stage) << '\n' << io.config_fingerprint << '\n';
  for (const auto& path : io.inputs) {
    out << path.string() << '=';
    out << (std::filesystem::exists(path) ? io::file_digest(path) : "absent");
    out << '\n';
  }
  return out.str();
}

std::filesystem::path stamp_path(const PipelineConfig& config, Stage stage) {
  return config.workdir / ".stamps" / stage_name(stage);
}

}  // namespace

namespace {

void validate_pipeline_config(const PipelineConfig& c) {
  parse_policy(c.policy);
  if (c.retriever != "sparse" && c.retriever != "dense")
    throw ValidationError("unknown retriever: " + c.retriever);
  if (c.top_k < 1) throw ValidationError("top_k must be >= 1");
  if (c.retrieve_depth < 1) throw ValidationError("retrieve_depth must be >= 1");
  if (c.score_top_k == 0 || c.score_top_k < -1)
    throw ValidationError("score_top_k must be >= 1 (or -1 for top_k)");
  if (c.delta < 0.0) throw ValidationError("delta must be >= 0");
  if (!(c.pair_fraction > 0.0) || c.pair_fraction > 1.0)
    throw ValidationError("pair_fraction must be in (0, 1]");
  if (c.scorer_parallelism < 1) throw ValidationError("scorer_parallelism must be >= 1");
  if (c.scorer_retries < 0) throw ValidationError("scorer_retries must be >= 0");
  if (c.scorer_timeout_ms < 1) throw ValidationError("scorer_timeout_ms must be >= 1");
  if (!(c.softmax_temperature > 0.0)) throw ValidationError("softmax_temperature must be > 0");
  if (!(c.beta > 0.0)) throw ValidationError("beta must be > 0");
  if (c.ndcg_cutoff < 1) throw ValidationError("ndcg_cutoff must be >= 1");
  if (c.metric_ks.empty()) throw ValidationError("metric_ks must not be empty");
  for (int k : c.metric_ks)
    if (k < 1) throw ValidationError("metric_ks entries must be >= 1");
  if (c.warmup_fraction < 0.0 || c.warmup_fraction > 1.0)
    throw ValidationError("warmup_fraction must be in [0, 1]");
  if (c.toy_epochs < 1) throw ValidationError("toy_epochs must be >= 1");
  if (c.include_first_turns != "auto" && c.include_first_turns != "true" &&
      c.include_first_turns != "false")
    throw ValidationError("include_first_turns must be auto, true, or false");
  parse_pair_mode(c.pair_mode);
  parse_reward_method(c.reward_method);
}

}  // namespace

bool run_stage(const PipelineConfig& config, Stage stage, bool force) {
  validate_pipeline_config(config);
  std::filesystem::create_directories(config.workdir / ".stamps");
  StageIo io = stage_io(config, stage);

  // Prerequisites produced by earlier stages get an actionable error.
  for (const auto& input : io.inputs) {
    if (input.empty())
      throw ValidationError("stage " + stage_name(stage) + ": required input not configured");
    if (std::filesystem::exists(input)) continue;
    std::string producer;
    for (Stage other : all_stages()) {
      if (other == stage) continue;
      for (const auto& out : stage_io(config, other).outputs)
        if (out == input) producer = stage_name(other);
    }
    if (!producer.empty())
      throw ValidationError("stage " + stage_name(stage) + ": missing artifact " +
                            input.string() + "; run the '" + producer + "' stage first");
    throw ValidationError("stage " + stage_name(stage) + ": missing input " + input.string());
  }

  std::string stamp = stamp_value(stage, io);
  std::filesystem::path sp = stamp_path(config, stage);
  if (!force && std::filesystem::exists(sp)) {
    bool outputs_ok = true;
    for (const auto& out : io.outputs)
      if (!std::filesystem::exists(out)) outputs_ok = false;
    if (outputs_ok && io::read_file(sp) == stamp) {
      std::cout << stage_name(stage) << ": up to date\n";
      return false;
    }
  }

  switch (stage) {
    case Stage::Index: stage_index(config); break;
    case Stage::Retrieve: stage_retrieve(config); break;
    case Stage::Score: stage_score(config); break;
    case Stage::Reward: stage_reward(config); break;
    case Stage::Pairs: stage_pairs(config); break;
    case Stage::Export: stage_export(config); break;
    case Stage::TrainToy: stage_train_toy(config); break;
    case Stage::Eval: stage_eval(config); break;
    case Stage::Report: stage_report(config); break;
  }
  io::write_file_atomic(sp, stamp);
  return true;
}

void run_pipeline(const PipelineConfig& config, const std::vector<Stage>& stages, bool force) {
  for (Stage stage : stages) run_stage(config, stage, force);
}

}  // namespace adaqr
