#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "adaqr/corpus.hpp"
#include "adaqr/ranked_list.hpp"

namespace adaqr {

/// Exhaustive inner-product search over ingested vectors (no ANN structures,
/// no in-process encoders). Ties break by ascending passage id.
class DenseIndex {
 public:
  static DenseIndex build(const EmbeddingTable& table);

  RankedList search(std::span<const float> query, int top_n,
                    const std::string& query_id = "") const;

  size_t dim() const { return dim_; }
  size_t doc_count() const { return ids_.size(); }

  void save(const std::filesystem::path& path) const;
  static DenseIndex load(const std::filesystem::path& path);

 private:
  size_t dim_ = 0;
  std::vector<std::string> ids_;  // ascending
  std::vector<float> data_;       // ids_.size() * dim_
};

}  // namespace adaqr
