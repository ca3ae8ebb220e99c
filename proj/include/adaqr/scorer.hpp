#pragma once

#include <compare>
#include <memory>
#include <string>
#include <vector>

namespace adaqr {

/// Identifies one rewrite candidate of one turn.
struct CandidateKey {
  std::string conversation_id;
  int turn_index = 0;
  int candidate_index = 0;  // 0-based

  auto operator<=>(const CandidateKey&) const = default;
  std::string str() const {
    return conversation_id + "_" + std::to_string(turn_index) + "_" +
           std::to_string(candidate_index);
  }
};

/// Inputs for one answer-likelihood evaluation. The context carries the
/// serialized history plus the ORIGINAL question, never the rewrite, so the
/// passage alone differentiates scores.
struct ScoringRequest {
  std::string context;
  std::string passage;
  std::string answer;
};

struct ScoreRecord {
  CandidateKey key;
  std::string passage_id;
  double logprob = 0.0;
  std::string backend;
};

/// Answer-likelihood backend: returns the total log-probability of the answer
/// tokens given (context, passage).
class ScorerBackend {
 public:
  virtual ~ScorerBackend() = default;

  virtual double score(const ScoringRequest& request) const = 0;

  /// Score a slice of requests; `index_offset` is only used to name the
  /// failing request in errors. Default loops over score().
  virtual std::vector<double> score_many(const std::vector<ScoringRequest>& requests,
                                         size_t index_offset) const;

  virtual std::string tag() const = 0;
};

/// Deterministic stand-in for CI: ln(token_f1(answer, passage) + 1e-6).
/// Strictly increasing in token F1, so it orders passages by answer overlap.
class MockScorer final : public ScorerBackend {
 public:
  double score(const ScoringRequest& request) const override;
  std::string tag() const override { return "mock"; }
};

struct HttpScorerConfig {
  std::string endpoint;       // e.g. http://localhost:8080
  int timeout_ms = 30000;
  int max_retries = 3;        // retries after the first attempt
  int retry_backoff_ms = 100; // doubled per retry
  bool use_batch_endpoint = true;
  std::string bearer_token;   // sent as Authorization: Bearer when non-empty
};

/// Remote backend speaking the fixed wire protocol:
///   POST /v1/score        {"context","passage","answer"} -> {"logprob": number}
///   POST /v1/score_batch  {"items":[...]}                -> {"logprobs":[...]}
/// Transport failures are retried with exponential backoff, then raised as
/// TransportError; malformed payloads raise ProtocolError.
class HttpScorer final : public ScorerBackend {
 public:
  explicit HttpScorer(HttpScorerConfig config);

  double score(const ScoringRequest& request) const override;
  std::vector<double> score_many(const std::vector<ScoringRequest>& requests,
                                 size_t index_offset) const override;
  std::string tag() const override { return "remote"; }

 private:
  std::string post_json(const std::string& route, const std::string& body) const;

  HttpScorerConfig config_;
  std::string host_;
  int port_ = 0;
};

/// Scores all requests with up to `parallelism` workers. Results are
/// order-aligned with the input and identical to sequential scoring; a hard
/// per-request error fails the whole batch naming the lowest failing index.
std::vector<double> score_batch(const ScorerBackend& backend,
                                const std::vector<ScoringRequest>& requests, int parallelism);

/// Length-normalized variant of a total answer logprob (mean per answer token).
double length_normalized(double total_logprob, const std::string& answer);

}  // namespace adaqr
