#include "adaqr/scorer.hpp"

#include <chrono>
#include <cmath>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "adaqr/error.hpp"
#include "adaqr/reward.hpp"
#include "adaqr/text.hpp"

namespace adaqr {

using nlohmann::json;

namespace {

void validate_request(const ScoringRequest& request) {
  if (request.answer.empty()) throw ValidationError("scoring request with empty answer");
  if (request.context.empty()) throw ValidationError("scoring request with empty context");
}

}  // namespace

std::vector<double> ScorerBackend::score_many(const std::vector<ScoringRequest>& requests,
                                              size_t index_offset) const {
  std::vector<double> out;
  out.reserve(requests.size());
  for (size_t i = 0; i < requests.size(); i++) {
    try {
      out.push_back(score(requests[i]));
    } catch (const TransportError&) {
      throw;
    } catch (const std::exception& e) {
      throw ValidationError("scoring request " + std::to_string(index_offset + i) +
                            " failed: " + e.what());
    }
  }
  return out;
}

double MockScorer::score(const ScoringRequest& request) const {
  validate_request(request);
  return std::log(token_f1(request.answer, request.passage) + 1e-6);
}

HttpScorer::HttpScorer(HttpScorerConfig config) : config_(std::move(config)) {
  // Accept "http://host:port" or "host:port"; httplib wants scheme+host.
  host_ = config_.endpoint;
  if (host_.rfind("http://", 0) == 0) host_ = host_.substr(7);
  auto slash = host_.find('/');
  if (slash != std::string::npos) host_ = host_.substr(0, slash);
  auto colon = host_.rfind(':');
  port_ = 80;
  if (colon != std::string::npos) {
    try {
      port_ = std::stoi(host_.substr(colon + 1));
    } catch (const std::exception&) {
      throw ValidationError("bad scorer endpoint: " + config_.endpoint);
    }
    host_ = host_.substr(0, colon);
  }
  if (host_.empty()) throw ValidationError("bad scorer endpoint: " + config_.endpoint);
}

std::string HttpScorer::post_json(const std::string& route, const std::string& body) const {
  std::string last_error;
  for (int attempt = 0; attempt <= config_.max_retries; attempt++) {
    if (attempt > 0) {
      int delay = config_.retry_backoff_ms << (attempt - 1);
      std::this_thread::sleep_for(std::chrono::milliseconds(delay));
    }
    httplib::Client client(host_, port_);
    client.set_connection_timeout(config_.timeout_ms / 1000, (config_.timeout_ms % 1000) * 1000);
    client.set_read_timeout(config_.timeout_ms / 1000, (config_.timeout_ms % 1000) * 1000);
    httplib::Headers headers;
    if (!config_.bearer_token.empty())
      headers.emplace("Authorization", "Bearer " + config_.bearer_token);
    auto res = client.Post(route, headers, body, "application/json");
    if (!res) {
      last_error = "connection failure (" + httplib::to_string(res.error()) + ")";
      continue;
    }
    if (res->status != 200) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    return res->body;
  }
  throw TransportError("scorer request to " + config_.endpoint + route + " failed after " +
                       std::to_string(config_.max_retries + 1) + " attempts: " + last_error);
}

namespace {

double finite_logprob(const json& value, const std::string& where) {
  if (!value.is_number())
    throw ProtocolError(where + ": logprob is not a number");
  double lp = value.get<double>();
  if (!std::isfinite(lp)) throw ProtocolError(where + ": non-finite logprob");
  return lp;
}

}  // namespace

double HttpScorer::score(const ScoringRequest& request) const {
  validate_request(request);
  json body = {{"context", request.context}, {"passage", request.passage},
               {"answer", request.answer}};
  std::string response = post_json("/v1/score", body.dump());
  json parsed;
  try {
    parsed = json::parse(response);
  } catch (const json::parse_error& e) {
    throw ProtocolError(std::string("scorer response is not JSON: ") + e.what());
  }
  if (!parsed.contains("logprob")) throw ProtocolError("scorer response missing logprob");
  return finite_logprob(parsed["logprob"], "scorer response");
}

std::vector<double> HttpScorer::score_many(const std::vector<ScoringRequest>& requests,
                                           size_t index_offset) const {
  if (requests.empty()) return {};
  if (!config_.use_batch_endpoint) return ScorerBackend::score_many(requests, index_offset);
  for (const auto& r : requests) validate_request(r);
  json items = json::array();
  for (const auto& r : requests)
    items.push_back({{"context", r.context}, {"passage", r.passage}, {"answer", r.answer}});
  std::string response = post_json("/v1/score_batch", json{{"items", items}}.dump());
  json parsed;
  try {
    parsed = json::parse(response);
  } catch (const json::parse_error& e) {
    throw ProtocolError(std::string("scorer batch response is not JSON: ") + e.what());
  }
  if (!parsed.contains("logprobs") || !parsed["logprobs"].is_array())
    throw ProtocolError("scorer batch response missing logprobs array");
  const json& lps = parsed["logprobs"];
  if (lps.size() != requests.size())
    throw ProtocolError("scorer batch returned " + std::to_string(lps.size()) +
                        " logprobs for " + std::to_string(requests.size()) + " items");
  std::vector<double> out;
  out.reserve(lps.size());
  for (size_t i = 0; i < lps.size(); i++)
    out.push_back(finite_logprob(lps[i], "scorer batch item " + std::to_string(index_offset + i)));
  return out;
}

std::vector<double> score_batch(const ScorerBackend& backend,
                                const std::vector<ScoringRequest>& requests, int parallelism) {
  if (parallelism < 1) throw ValidationError("scorer parallelism must be >= 1");
  if (requests.empty()) return {};

  size_t n = requests.size();
  size_t workers = std::min(static_cast<size_t>(parallelism), n);
  if (workers == 1) return backend.score_many(requests, 0);

  size_t chunk = (n + workers - 1) / workers;
  std::vector<double> results(n);
  std::vector<std::exception_ptr> errors(workers);
  std::vector<size_t> error_offset(workers, n);
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (size_t w = 0; w < workers; w++) {
    threads.emplace_back([&, w]() {
      size_t begin = w * chunk;
      size_t end = std::min(begin + chunk, n);
      if (begin >= end) return;
      try {
        std::vector<ScoringRequest> slice(requests.begin() + static_cast<ptrdiff_t>(begin),
                                          requests.begin() + static_cast<ptrdiff_t>(end));
        std::vector<double> vals = backend.score_many(slice, begin);
        std::copy(vals.begin(), vals.end(), results.begin() + static_cast<ptrdiff_t>(begin));
      } catch (...) {
        errors[w] = std::current_exception();
        error_offset[w] = begin;
      }
    });
  }
  for (auto& t : threads) t.join();

  // Re-raise the failure from the lowest request index for determinism.
  size_t first = n;
  size_t first_w = workers;
  for (size_t w = 0; w < workers; w++) {
    if (errors[w] && error_offset[w] < first) {
      first = error_offset[w];
      first_w = w;
    }
  }
  if (first_w < workers) std::rethrow_exception(errors[first_w]);
  return results;
}

double length_normalized(double total_logprob, const std::string& answer) {
  size_t tokens = text::tokenize(answer).size();
  return total_logprob / static_cast<double>(std::max<size_t>(tokens, 1));
}

}  // namespace adaqr
