#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "adaqr/corpus.hpp"
#include "adaqr/ranked_list.hpp"

namespace adaqr {

struct Bm25Params {
  double k1 = 0.9;
  double b = 0.4;

  // qrecc uses 0.82/0.68; the other datasets 0.9/0.4.
  static Bm25Params for_policy(QueryPolicy policy);
};

struct AnalyzerConfig {
  bool stem = false;  // Porter stemming, off by default
};

/// Immutable inverted index with per-term postings (doc, tf), document
/// lengths, and collection statistics.
///
/// Scoring: idf(t) = ln(1 + (N - df + 0.5) / (df + 0.5)),
///          tf part = tf * (k1 + 1) / (tf + k1 * (1 - b + b * dl / avgdl)).
/// Query terms contribute once per occurrence. Ties break by ascending
/// passage id; documents matching no term are never returned.
class Bm25Index {
 public:
  static Bm25Index build(const PassageCorpus& corpus, Bm25Params params,
                         AnalyzerConfig analyzer = {});

  RankedList search(const std::string& query, int top_n,
                    const std::string& query_id = "") const;

  size_t doc_count() const { return doc_ids_.size(); }
  double avg_doc_len() const { return avgdl_; }
  size_t doc_freq(const std::string& term) const;
  uint32_t doc_length(const std::string& passage_id) const;
  const Bm25Params& params() const { return params_; }

  void save(const std::filesystem::path& path) const;
  static Bm25Index load(const std::filesystem::path& path);

 private:
  struct Posting {
    uint32_t doc = 0;  // index into doc_ids_
    uint32_t tf = 0;
  };

  Bm25Params params_;
  AnalyzerConfig analyzer_;
  std::vector<std::string> doc_ids_;  // ascending
  std::vector<uint32_t> doc_len_;
  std::map<std::string, std::vector<Posting>> postings_;
  double avgdl_ = 0.0;
};

}  // namespace adaqr
