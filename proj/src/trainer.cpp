#include "adaqr/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "adaqr/error.hpp"
#include "adaqr/io.hpp"

namespace adaqr {

void ToyPolicy::register_candidate(const std::string& prompt, const std::string& candidate,
                                   double logit) {
  table_[prompt].emplace(candidate, logit);
}

bool ToyPolicy::has(const std::string& prompt, const std::string& candidate) const {
  auto it = table_.find(prompt);
  return it != table_.end() && it->second.count(candidate) != 0;
}

const std::map<std::string, double>& ToyPolicy::prompt_row(const std::string& prompt) const {
  auto it = table_.find(prompt);
  if (it == table_.end()) throw ValidationError("toy policy: unknown prompt");
  return it->second;
}

double ToyPolicy::logit(const std::string& prompt, const std::string& candidate) const {
  const auto& row = prompt_row(prompt);
  auto it = row.find(candidate);
  if (it == row.end()) throw ValidationError("toy policy: unknown candidate: " + candidate);
  return it->second;
}

void ToyPolicy::add_to_logit(const std::string& prompt, const std::string& candidate,
                             double delta) {
  auto it = table_.find(prompt);
  if (it == table_.end()) throw ValidationError("toy policy: unknown prompt");
  auto cit = it->second.find(candidate);
  if (cit == it->second.end())
    throw ValidationError("toy policy: unknown candidate: " + candidate);
  cit->second += delta;
}

double ToyPolicy::log_prob(const std::string& prompt, const std::string& candidate) const {
  const auto& row = prompt_row(prompt);
  auto it = row.find(candidate);
  if (it == row.end()) throw ValidationError("toy policy: unknown candidate: " + candidate);
  double max_logit = row.begin()->second;
  for (const auto& [_, l] : row) max_logit = std::max(max_logit, l);
  double sum = 0.0;
  for (const auto& [_, l] : row) sum += std::exp(l - max_logit);
  return it->second - (max_logit + std::log(sum));
}

double sft_nll_loss(const ToyPolicy& policy, const std::string& prompt,
                    const std::string& label) {
  return -policy.log_prob(prompt, label);
}

namespace {

// log(1 + exp(x)) without overflow
double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

}  // namespace

double implicit_reward_margin(const ToyPolicy& policy, const ToyPolicy& reference,
                              const PreferencePair& pair, double beta) {
  double ratio_w = policy.log_prob(pair.prompt, pair.chosen) -
                   reference.log_prob(pair.prompt, pair.chosen);
  double ratio_l = policy.log_prob(pair.prompt, pair.rejected) -
                   reference.log_prob(pair.prompt, pair.rejected);
  return beta * (ratio_w - ratio_l);
}

double dpo_loss(const ToyPolicy& policy, const ToyPolicy& reference, const PreferencePair& pair,
                double beta) {
  if (!(beta > 0.0)) throw ValidationError("dpo beta must be > 0");
  return softplus(-implicit_reward_margin(policy, reference, pair, beta));
}

DpoGradient dpo_grad(const ToyPolicy& policy, const ToyPolicy& reference,
                     const PreferencePair& pair, double beta) {
  if (!(beta > 0.0)) throw ValidationError("dpo beta must be > 0");
  DpoGradient grad;
  grad.prompt = pair.prompt;
  grad.z = implicit_reward_margin(policy, reference, pair, beta);
  grad.loss = softplus(-grad.z);
  // dL/dz = sigmoid(z) - 1, stable at both tails.
  double dldz = -1.0 / (1.0 + std::exp(grad.z));

  const auto& row = policy.table().at(pair.prompt);
  double max_logit = row.begin()->second;
  for (const auto& [_, l] : row) max_logit = std::max(max_logit, l);
  double sum = 0.0;
  for (const auto& [_, l] : row) sum += std::exp(l - max_logit);

  grad.dlogit.reserve(row.size());
  for (const auto& [candidate, l] : row) {
    double p = std::exp(l - max_logit) / sum;
    double d_logpw = (candidate == pair.chosen ? 1.0 : 0.0) - p;
    double d_logpl = (candidate == pair.rejected ? 1.0 : 0.0) - p;
    grad.dlogit.emplace_back(candidate, dldz * beta * (d_logpw - d_logpl));
  }
  return grad;
}

TrainResult train_toy_policy(const std::vector<PreferencePair>& pairs, const DpoConfig& config) {
  if (pairs.empty()) throw ValidationError("train_toy_policy: no pairs");
  if (!(config.beta > 0.0)) throw ValidationError("dpo beta must be > 0");
  if (config.epochs < 1) throw ValidationError("train_toy_policy: epochs must be >= 1");
  if (config.warmup_fraction < 0.0 || config.warmup_fraction > 1.0)
    throw ValidationError("train_toy_policy: warmup_fraction must be in [0, 1]");

  TrainResult result;
  for (const PreferencePair& p : pairs) {
    result.policy.register_candidate(p.prompt, p.chosen);
    result.policy.register_candidate(p.prompt, p.rejected);
  }
  result.reference = result.policy;  // frozen SFT reference; logits stay put

  auto margin_fraction = [&]() {
    size_t positive = 0;
    for (const PreferencePair& p : pairs)
      if (implicit_reward_margin(result.policy, result.reference, p, config.beta) > 0.0)
        positive++;
    return static_cast<double>(positive) / static_cast<double>(pairs.size());
  };
  result.log.initial_margin_fraction = margin_fraction();

  size_t n = pairs.size();
  size_t total_steps = static_cast<size_t>(config.epochs) * n;
  size_t warmup_steps = static_cast<size_t>(
      std::llround(config.warmup_fraction * static_cast<double>(total_steps)));
  auto lr_at = [&](size_t step) {
    if (step < warmup_steps)
      return config.learning_rate * static_cast<double>(step + 1) /
             static_cast<double>(warmup_steps);
    if (total_steps == warmup_steps) return config.learning_rate;
    return config.learning_rate * static_cast<double>(total_steps - step) /
           static_cast<double>(total_steps - warmup_steps);
  };

  std::mt19937_64 rng(config.seed);
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});

  size_t step = 0;
  for (int epoch = 0; epoch < config.epochs; epoch++) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (size_t i : order) {
      DpoGradient grad = dpo_grad(result.policy, result.reference, pairs[i], config.beta);
      loss_sum += grad.loss;
      double lr = lr_at(step++);
      for (const auto& [candidate, g] : grad.dlogit)
        result.policy.add_to_logit(grad.prompt, candidate, -lr * g);
    }
    result.log.epoch_mean_loss.push_back(loss_sum / static_cast<double>(n));
  }
  result.log.final_margin_fraction = margin_fraction();
  return result;
}

void write_training_config(const std::filesystem::path& path, double beta, double delta,
                           const DpoConfig& config) {
  std::ostringstream out;
  out << "beta = " << beta << "\n";
  out << "delta = " << delta << "\n";
  out << "sft_learning_rate = 1e-4\n";
  out << "dpo_learning_rate = " << config.learning_rate << "\n";
  out << "warmup_fraction = " << config.warmup_fraction << "\n";
  out << "lr_schedule = linear_warmup_then_linear_decay_to_zero\n";
  out << "optimizer = adamw\n";
  // Adapter settings for external trainers; opaque passthrough.
  out << "adapter = qlora\n";
  out << "adapter_rank = 8\n";
  out << "adapter_scale = 16\n";
  out << "adapter_dropout = 0.05\n";
  out << "adapter_targets = query,value\n";
  out << "quantization = 4bit-normalfloat\n";
  io::write_file_atomic(path, out.str());
}

}  // namespace adaqr
