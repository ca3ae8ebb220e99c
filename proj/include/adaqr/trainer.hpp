#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "adaqr/pairs.hpp"

namespace adaqr {

/// Categorical policy over an explicit candidate set per prompt. Candidate
/// log-probability is logit - logsumexp(logits of that prompt), so the
/// per-prompt distribution always normalizes. This isolates the sequence-level
/// objectives exactly; it is not a token-level LM.
class ToyPolicy {
 public:
  void register_candidate(const std::string& prompt, const std::string& candidate,
                          double logit = 0.0);
  bool has(const std::string& prompt, const std::string& candidate) const;
  double logit(const std::string& prompt, const std::string& candidate) const;
  void add_to_logit(const std::string& prompt, const std::string& candidate, double delta);

  double log_prob(const std::string& prompt, const std::string& candidate) const;

  const std::map<std::string, std::map<std::string, double>>& table() const { return table_; }
  bool operator==(const ToyPolicy&) const = default;

 private:
  const std::map<std::string, double>& prompt_row(const std::string& prompt) const;

  std::map<std::string, std::map<std::string, double>> table_;
};

struct DpoConfig {
  double beta = 0.1;
  double learning_rate = 1e-5;
  double warmup_fraction = 0.1;  // of total steps, then linear decay to 0
  int epochs = 10;
  uint64_t seed = 0;
};

/// Negative log-likelihood of the labeled rewrite under the policy.
double sft_nll_loss(const ToyPolicy& policy, const std::string& prompt,
                    const std::string& label);

/// z = beta * [(log pi(w) - log ref(w)) - (log pi(l) - log ref(l))];
/// loss = -log sigmoid(z), evaluated as softplus(-z) with overflow-safe
/// branching.
double dpo_loss(const ToyPolicy& policy, const ToyPolicy& reference, const PreferencePair& pair,
                double beta);

/// The implicit reward margin z itself (positive once the policy prefers the
/// chosen rewrite more than the reference does).
double implicit_reward_margin(const ToyPolicy& policy, const ToyPolicy& reference,
                              const PreferencePair& pair, double beta);

struct DpoGradient {
  std::string prompt;
  std::vector<std::pair<std::string, double>> dlogit;  // per candidate of the prompt
  double z = 0.0;
  double loss = 0.0;
};

/// Analytic gradient of dpo_loss w.r.t. the policy logits of the pair's
/// prompt (the frozen reference receives none): dL/dz = sigmoid(z) - 1,
/// propagated through the log-softmax.
DpoGradient dpo_grad(const ToyPolicy& policy, const ToyPolicy& reference,
                     const PreferencePair& pair, double beta);

struct TrainingLog {
  std::vector<double> epoch_mean_loss;
  double initial_margin_fraction = 0.0;  // fraction of pairs with z > 0
  double final_margin_fraction = 0.0;
};

struct TrainResult {
  ToyPolicy policy;
  ToyPolicy reference;
  TrainingLog log;
};

/// Plain gradient descent over the pair set: linear warmup over
/// warmup_fraction of steps, then linear decay to 0. Pair order is shuffled
/// per epoch from the seed; the run is bit-reproducible.
TrainResult train_toy_policy(const std::vector<PreferencePair>& pairs, const DpoConfig& config);

/// Key-value metadata emitted beside the DPO dataset for external trainers.
/// Adapter settings are opaque passthrough, never interpreted here.
void write_training_config(const std::filesystem::path& path, double beta, double delta,
                           const DpoConfig& config);

}  // namespace adaqr
