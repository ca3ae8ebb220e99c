#include <cstdlib>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "adaqr/corpus.hpp"
#include "adaqr/error.hpp"
#include "adaqr/fixture.hpp"
#include "adaqr/pipeline.hpp"
#include "adaqr/scorer.hpp"

namespace {

struct Overrides {
  std::vector<std::pair<std::string, std::string>> values;

  void set(const std::string& key, const std::string& value) { values.emplace_back(key, value); }
};

adaqr::PipelineConfig load_config(const std::string& config_path, const Overrides& overrides) {
  adaqr::PipelineConfig config = adaqr::load_pipeline_config(config_path);
  for (const auto& [key, value] : overrides.values)
    adaqr::set_config_key(config, key, value, std::filesystem::current_path());
  return config;
}

int run_mock_server(int port) {
  adaqr::MockScorer scorer;
  httplib::Server server;
  server.Post("/v1/score", [&](const httplib::Request& req, httplib::Response& res) {
    try {
      auto body = nlohmann::json::parse(req.body);
      adaqr::ScoringRequest request{body.at("context").get<std::string>(),
                                    body.at("passage").get<std::string>(),
                                    body.at("answer").get<std::string>()};
      res.set_content(nlohmann::json{{"logprob", scorer.score(request)}}.dump(),
                      "application/json");
    } catch (const std::exception& e) {
      res.status = 400;
      res.set_content(nlohmann::json{{"error", e.what()}}.dump(), "application/json");
    }
  });
  server.Post("/v1/score_batch", [&](const httplib::Request& req, httplib::Response& res) {
    try {
      auto body = nlohmann::json::parse(req.body);
      nlohmann::json logprobs = nlohmann::json::array();
      for (const auto& item : body.at("items")) {
        adaqr::ScoringRequest request{item.at("context").get<std::string>(),
                                      item.at("passage").get<std::string>(),
                                      item.at("answer").get<std::string>()};
        logprobs.push_back(scorer.score(request));
      }
      res.set_content(nlohmann::json{{"logprobs", logprobs}}.dump(), "application/json");
    } catch (const std::exception& e) {
      res.status = 400;
      res.set_content(nlohmann::json{{"error", e.what()}}.dump(), "application/json");
    }
  });
  std::cout << "mock scorer listening on port " << port << "\n";
  if (!server.listen("0.0.0.0", port)) {
    std::cerr << "cannot listen on port " << port << "\n";
    return 2;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"adaqr: answer-likelihood preference pipeline for conversational query rewriting"};
  app.require_subcommand(1);

  std::string config_path;
  bool force = false;
  Overrides overrides;

  auto add_stage_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "pipeline config file")->required();
    cmd->add_flag("--force", force, "re-run even when artifacts are up to date");
  };
  auto add_override = [&](CLI::App* cmd, const std::string& flag, const std::string& key,
                          const std::string& help) {
    cmd->add_option_function<std::string>(
        flag, [&overrides, key](const std::string& v) { overrides.set(key, v); }, help);
  };

  // fixture
  auto* fixture_cmd = app.add_subcommand("fixture", "write the bundled synthetic dataset");
  std::string fixture_out = "fixture";
  fixture_cmd->add_option("--out", fixture_out, "output directory");

  // stats
  auto* stats_cmd = app.add_subcommand("stats", "report conversation instance counts");
  std::string stats_conversations;
  stats_cmd->add_option("--conversations", stats_conversations, "conversations file")->required();

  // stages
  auto* index_cmd = app.add_subcommand("index", "build the retrieval index");
  add_stage_common(index_cmd);
  add_override(index_cmd, "--retriever", "retriever", "sparse | dense");
  add_override(index_cmd, "--k1", "bm25_k1", "BM25 k1");
  add_override(index_cmd, "--b", "bm25_b", "BM25 b");
  add_override(index_cmd, "--stem", "stem", "enable Porter stemming (true/false)");

  auto* retrieve_cmd = app.add_subcommand("retrieve", "run retrieval for candidates and eval queries");
  add_stage_common(retrieve_cmd);
  add_override(retrieve_cmd, "--top-n", "retrieve_depth", "retrieval depth per query");

  auto* score_cmd = app.add_subcommand("score", "collect answer log-likelihoods");
  add_stage_common(score_cmd);
  add_override(score_cmd, "--endpoint", "scorer_endpoint", "mock or http://host:port");
  add_override(score_cmd, "--parallelism", "scorer_parallelism", "concurrent scorer requests");

  auto* reward_cmd = app.add_subcommand("reward", "compute per-candidate rewards");
  add_stage_common(reward_cmd);
  add_override(reward_cmd, "--method", "reward_method", "marginal | concat | gold | pseudo");
  add_override(reward_cmd, "--k", "top_k", "passages marginalized per candidate");

  auto* pairs_cmd = app.add_subcommand("pairs", "build preference pairs under the gap rule");
  add_stage_common(pairs_cmd);
  add_override(pairs_cmd, "--delta", "delta", "minimum reward gap");
  add_override(pairs_cmd, "--mode", "pair_mode", "all | max-gap");
  add_override(pairs_cmd, "--fraction", "pair_fraction", "random subsample fraction (0,1]");

  auto* export_cmd = app.add_subcommand("export", "write the DPO dataset and training metadata");
  add_stage_common(export_cmd);

  auto* train_cmd = app.add_subcommand("train-toy", "verify the DPO objective on a toy policy");
  add_stage_common(train_cmd);
  add_override(train_cmd, "--beta", "beta", "DPO beta");
  add_override(train_cmd, "--epochs", "toy_epochs", "training epochs");
  add_override(train_cmd, "--lr", "toy_learning_rate", "toy policy learning rate");

  auto* eval_cmd = app.add_subcommand("eval", "score the evaluation run against qrels");
  add_stage_common(eval_cmd);
  add_override(eval_cmd, "--ks", "metric_ks", "recall cutoffs, comma separated");
  add_override(eval_cmd, "--ndcg-cutoff", "ndcg_cutoff", "NDCG cutoff");

  auto* report_cmd = app.add_subcommand("report", "render metric tables per topic-shift segment");
  add_stage_common(report_cmd);

  auto* run_cmd = app.add_subcommand("run", "run several stages in order");
  add_stage_common(run_cmd);
  std::string stages_arg = "index,retrieve,score,reward,pairs,export,train-toy,eval,report";
  run_cmd->add_option("--stages", stages_arg, "comma-separated stage list");

  auto* server_cmd = app.add_subcommand("mock-server", "serve the mock scorer over HTTP");
  int server_port = 8823;
  server_cmd->add_option("--port", server_port, "listen port");

  CLI11_PARSE(app, argc, argv);

  try {
    if (fixture_cmd->parsed()) {
      adaqr::fixture::FixturePaths paths = adaqr::fixture::write_fixture(fixture_out);
      std::cout << "fixture written to " << fixture_out << "\nconfig: " << paths.config.string()
                << "\n";
      return 0;
    }
    if (stats_cmd->parsed()) {
      adaqr::ConversationSet set = adaqr::load_conversations(stats_conversations);
      adaqr::InstanceCounts counts = set.counts();
      std::cout << "conversations: " << counts.conversations << "\n"
                << "turns: " << counts.turns << "\n"
                << "with answer: " << counts.with_answer << "\n"
                << "with answer, non-first-turn: " << counts.with_answer_non_first << "\n";
      return 0;
    }
    if (server_cmd->parsed()) return run_mock_server(server_port);

    adaqr::PipelineConfig config = load_config(config_path, overrides);
    if (run_cmd->parsed()) {
      std::vector<adaqr::Stage> stages;
      std::istringstream ss(stages_arg);
      std::string name;
      while (std::getline(ss, name, ','))
        if (!name.empty()) stages.push_back(adaqr::parse_stage(name));
      adaqr::run_pipeline(config, stages, force);
      return 0;
    }
    for (auto [cmd, stage] : std::initializer_list<std::pair<CLI::App*, adaqr::Stage>>{
             {index_cmd, adaqr::Stage::Index}, {retrieve_cmd, adaqr::Stage::Retrieve},
             {score_cmd, adaqr::Stage::Score}, {reward_cmd, adaqr::Stage::Reward},
             {pairs_cmd, adaqr::Stage::Pairs}, {export_cmd, adaqr::Stage::Export},
             {train_cmd, adaqr::Stage::TrainToy}, {eval_cmd, adaqr::Stage::Eval},
             {report_cmd, adaqr::Stage::Report}}) {
      if (cmd->parsed()) {
        adaqr::run_stage(config, stage, force);
        return 0;
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return adaqr::exit_code_for(e);
  }
  std::cerr << "no subcommand\n";
  return 1;
}
