#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace adaqr {

/// Everything the pipeline stages need, loadable from a key=value config file
/// with CLI flags overriding individual keys. Relative paths resolve against
/// the config file's directory.
struct PipelineConfig {
  // data
  std::string policy = "topiocqa";
  std::filesystem::path conversations;
  std::filesystem::path passages;
  std::filesystem::path candidates;
  std::filesystem::path qrels;
  std::filesystem::path embeddings;          // passage vectors, dense retriever
  std::filesystem::path embedding_ids;       // sidecar; defaults to embeddings + ".ids"
  std::filesystem::path query_embeddings;    // query vectors keyed by query id
  std::filesystem::path query_embedding_ids;
  std::filesystem::path workdir = "work";

  // retrieval
  std::string retriever = "sparse";  // sparse | dense
  double bm25_k1 = -1.0;             // < 0: policy default
  double bm25_b = -1.0;
  bool stem = false;
  int retrieve_depth = 100;
  int top_k = 5;
  double softmax_temperature = 1.0;

  // scorer
  std::string scorer_endpoint = "mock";  // "mock" or http://host:port
  int scorer_parallelism = 4;
  int scorer_retries = 3;
  int scorer_timeout_ms = 30000;
  bool scorer_normalize = false;  // length-normalized answer logprob
  int score_top_k = -1;           // passages scored per candidate; < 0: top_k

  // reward
  std::string reward_method = "marginal";  // marginal | concat | gold | pseudo
  int pseudo_depth = 100;

  // pairs
  double delta = 0.1;
  std::string pair_mode = "all";  // all | max-gap
  double pair_fraction = 1.0;

  // toy trainer (desk-scale verification; external trainers read the
  // exported dataset and metadata instead)
  double beta = 0.1;
  double toy_learning_rate = 0.5;
  int toy_epochs = 20;
  double warmup_fraction = 0.1;

  // eval
  std::vector<int> metric_ks{1, 5, 10};
  int ndcg_cutoff = 3;
  std::string eval_rewrite_source = "human";  // human | question
  // first-turn instances in the evaluation run: auto = policy default
  // (qrecc/topiocqa include, doc2dial excludes them regardless)
  std::string include_first_turns = "auto";  // auto | true | false

  uint64_t seed = 7;
  std::string run_tag = "adaqr";

  // workdir artifact paths
  std::filesystem::path index_path() const { return workdir / "index.bin"; }
  std::filesystem::path candidate_run_path() const { return workdir / "run_candidates.trec"; }
  std::filesystem::path eval_run_path() const { return workdir / "run_eval.trec"; }
  std::filesystem::path scores_path() const { return workdir / "scores.jsonl"; }
  std::filesystem::path rewards_path() const { return workdir / "rewards.jsonl"; }
  std::filesystem::path pairs_path() const { return workdir / "pairs.jsonl"; }
  std::filesystem::path dpo_dataset_path() const { return workdir / "dpo_dataset.jsonl"; }
  std::filesystem::path train_config_path() const { return workdir / "train_config.txt"; }
  std::filesystem::path toy_training_path() const { return workdir / "toy_training.json"; }
  std::filesystem::path metrics_path() const { return workdir / "metrics.json"; }
  std::filesystem::path report_path() const { return workdir / "report.txt"; }
};

PipelineConfig load_pipeline_config(const std::filesystem::path& path);

/// Set one config key from its textual form (shared by file parsing and CLI
/// overrides). Unknown key -> ValidationError.
void set_config_key(PipelineConfig& config, const std::string& key, const std::string& value,
                    const std::filesystem::path& base_dir);

enum class Stage { Index, Retrieve, Score, Reward, Pairs, Export, TrainToy, Eval, Report };

Stage parse_stage(const std::string& name);
std::string stage_name(Stage stage);
std::vector<Stage> all_stages();

/// Runs one stage: checks prerequisites, skips when the input stamp matches
/// (unless force), writes the artifact atomically. Returns false when skipped
/// as up-to-date.
bool run_stage(const PipelineConfig& config, Stage stage, bool force = false);

void run_pipeline(const PipelineConfig& config, const std::vector<Stage>& stages,
                  bool force = false);

}  // namespace adaqr
