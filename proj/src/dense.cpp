#include "adaqr/dense.hpp"

#include <algorithm>
#include <cstring>
#include <numeric>

#include "adaqr/error.hpp"
#include "adaqr/io.hpp"

namespace adaqr {

DenseIndex DenseIndex::build(const EmbeddingTable& table) {
  if (table.ids.empty()) throw ValidationError("cannot build dense index: no vectors");
  if (table.dim == 0) throw ValidationError("cannot build dense index: zero dimension");
  if (table.ids.size() * table.dim != table.data.size())
    throw ValidationError("embedding table shape mismatch");

  // Re-order rows by ascending id so tie-breaking never depends on input order.
  std::vector<size_t> order(table.ids.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return table.ids[a] < table.ids[b]; });
  for (size_t i = 1; i < order.size(); i++)
    if (table.ids[order[i]] == table.ids[order[i - 1]])
      throw ValidationError("duplicate id in embedding table: " + table.ids[order[i]]);

  DenseIndex index;
  index.dim_ = table.dim;
  index.ids_.reserve(order.size());
  index.data_.resize(table.data.size());
  for (size_t i = 0; i < order.size(); i++) {
    index.ids_.push_back(table.ids[order[i]]);
    std::memcpy(index.data_.data() + i * table.dim, table.vector_for(order[i]),
                table.dim * sizeof(float));
  }
  return index;
}

RankedList DenseIndex::search(std::span<const float> query, int top_n,
                              const std::string& query_id) const {
  if (top_n < 1) throw ValidationError("dense_search requires top_n >= 1");
  if (query.size() != dim_)
    throw ValidationError("query vector dimension " + std::to_string(query.size()) +
                          " does not match index dimension " + std::to_string(dim_));

  std::vector<double> scores(ids_.size());
  for (size_t i = 0; i < ids_.size(); i++) {
    const float* row = data_.data() + i * dim_;
    double dot = 0.0;
    for (size_t d = 0; d < dim_; d++) dot += static_cast<double>(row[d]) * query[d];
    scores[i] = dot;
  }

  std::vector<size_t> order(ids_.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return ids_[a] < ids_[b];
  });
  if (order.size() > static_cast<size_t>(top_n)) order.resize(static_cast<size_t>(top_n));

  RankedList out;
  out.query_id = query_id;
  out.entries.reserve(order.size());
  for (size_t i = 0; i < order.size(); i++)
    out.entries.push_back(RankedEntry{ids_[order[i]], scores[order[i]],
                                      static_cast<int>(i) + 1});
  validate_ranked_list(out);
  return out;
}

namespace {
constexpr char kDenseMagic[8] = {'A', 'D', 'Q', 'R', 'D', 'I', 'X', '1'};
}

void DenseIndex::save(const std::filesystem::path& path) const {
  std::string out(kDenseMagic, 8);
  uint32_t version = 1;
  uint32_t count = static_cast<uint32_t>(ids_.size());
  uint32_t dim = static_cast<uint32_t>(dim_);
  out.append(reinterpret_cast<char*>(&version), 4);
  out.append(reinterpret_cast<char*>(&count), 4);
  out.append(reinterpret_cast<char*>(&dim), 4);
  for (const auto& id : ids_) {
    uint32_t n = static_cast<uint32_t>(id.size());
    out.append(reinterpret_cast<char*>(&n), 4);
    out += id;
  }
  out.append(reinterpret_cast<const char*>(data_.data()), data_.size() * sizeof(float));
  io::write_file_atomic(path, out);
}

DenseIndex DenseIndex::load(const std::filesystem::path& path) {
  std::string bytes = io::read_file(path);
  if (bytes.size() < 20 || std::memcmp(bytes.data(), kDenseMagic, 8) != 0)
    throw ValidationError(path.string() + ": not a dense index file (bad magic)");
  size_t pos = 8;
  auto u32 = [&]() {
    if (pos + 4 > bytes.size()) throw ValidationError(path.string() + ": truncated index file");
    uint32_t v;
    std::memcpy(&v, bytes.data() + pos, 4);
    pos += 4;
    return v;
  };
  uint32_t version = u32();
  if (version != 1)
    throw ValidationError(path.string() + ": unsupported index version " +
                          std::to_string(version));
  uint32_t count = u32();
  DenseIndex index;
  index.dim_ = u32();
  index.ids_.reserve(count);
  for (uint32_t i = 0; i < count; i++) {
    uint32_t n = u32();
    if (pos + n > bytes.size()) throw ValidationError(path.string() + ": truncated index file");
    index.ids_.push_back(bytes.substr(pos, n));
    pos += n;
  }
  size_t payload = static_cast<size_t>(count) * index.dim_ * sizeof(float);
  if (pos + payload != bytes.size())
    throw ValidationError(path.string() + ": truncated index file");
  index.data_.resize(static_cast<size_t>(count) * index.dim_);
  std::memcpy(index.data_.data(), bytes.data() + pos, payload);
  return index;
}

}  // namespace adaqr
