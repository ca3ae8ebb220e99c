#include "adaqr/bm25.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <unordered_map>

#include "adaqr/error.hpp"
#include "adaqr/io.hpp"
#include "adaqr/text.hpp"

namespace adaqr {

Bm25Params Bm25Params::for_policy(QueryPolicy policy) {
  if (policy == QueryPolicy::Qrecc) return {0.82, 0.68};
  return {0.9, 0.4};
}

Bm25Index Bm25Index::build(const PassageCorpus& corpus, Bm25Params params,
                           AnalyzerConfig analyzer) {
  if (corpus.passages.empty()) throw ValidationError("cannot build BM25 index: empty corpus");
  if (params.k1 < 0.0) throw ValidationError("BM25 k1 must be >= 0");
  if (params.b < 0.0 || params.b > 1.0) throw ValidationError("BM25 b must be in [0, 1]");

  Bm25Index index;
  index.params_ = params;
  index.analyzer_ = analyzer;
  index.doc_ids_.reserve(corpus.passages.size());
  index.doc_len_.reserve(corpus.passages.size());

  uint64_t total_len = 0;
  for (const auto& [id, body] : corpus.passages) {  // std::map: ids ascending
    uint32_t doc = static_cast<uint32_t>(index.doc_ids_.size());
    index.doc_ids_.push_back(id);
    std::vector<std::string> tokens = text::analyze(body, analyzer.stem);
    index.doc_len_.push_back(static_cast<uint32_t>(tokens.size()));
    total_len += tokens.size();
    std::map<std::string, uint32_t> tf;
    for (const auto& t : tokens) tf[t]++;
    for (const auto& [term, count] : tf)
      index.postings_[term].push_back(Posting{doc, count});
  }
  index.avgdl_ = static_cast<double>(total_len) / static_cast<double>(index.doc_ids_.size());
  return index;
}

size_t Bm25Index::doc_freq(const std::string& term) const {
  auto it = postings_.find(term);
  return it == postings_.end() ? 0 : it->second.size();
}

uint32_t Bm25Index::doc_length(const std::string& passage_id) const {
  auto it = std::lower_bound(doc_ids_.begin(), doc_ids_.end(), passage_id);
  if (it == doc_ids_.end() || *it != passage_id)
    throw ValidationError("unknown passage id: " + passage_id);
  return doc_len_[static_cast<size_t>(it - doc_ids_.begin())];
}

RankedList Bm25Index::search(const std::string& query, int top_n,
                             const std::string& query_id) const {
  if (top_n < 1) throw ValidationError("bm25_search requires top_n >= 1");

  const double n_docs = static_cast<double>(doc_ids_.size());
  std::vector<double> scores(doc_ids_.size(), 0.0);
  std::vector<uint32_t> touched;

  for (const std::string& term : text::analyze(query, analyzer_.stem)) {
    auto it = postings_.find(term);
    if (it == postings_.end()) continue;
    const auto& plist = it->second;
    double df = static_cast<double>(plist.size());
    double idf = std::log(1.0 + (n_docs - df + 0.5) / (df + 0.5));
    for (const Posting& p : plist) {
      double tf = static_cast<double>(p.tf);
      double dl = static_cast<double>(doc_len_[p.doc]);
      double norm = params_.k1 * (1.0 - params_.b + params_.b * dl / avgdl_);
      if (scores[p.doc] == 0.0) touched.push_back(p.doc);
      scores[p.doc] += idf * tf * (params_.k1 + 1.0) / (tf + norm);
    }
  }

  std::sort(touched.begin(), touched.end(), [&](uint32_t a, uint32_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return doc_ids_[a] < doc_ids_[b];  // doc order == id order, but be explicit
  });
  if (touched.size() > static_cast<size_t>(top_n)) touched.resize(static_cast<size_t>(top_n));

  RankedList out;
  out.query_id = query_id;
  out.entries.reserve(touched.size());
  for (size_t i = 0; i < touched.size(); i++)
    out.entries.push_back(RankedEntry{doc_ids_[touched[i]], scores[touched[i]],
                                      static_cast<int>(i) + 1});
  validate_ranked_list(out);
  return out;
}

namespace {

constexpr char kIndexMagic[8] = {'A', 'D', 'Q', 'R', 'B', 'I', 'X', '1'};
constexpr uint32_t kIndexVersion = 1;

void put_u32(std::string& out, uint32_t v) { out.append(reinterpret_cast<char*>(&v), 4); }
void put_f64(std::string& out, double v) { out.append(reinterpret_cast<char*>(&v), 8); }
void put_str(std::string& out, const std::string& s) {
  put_u32(out, static_cast<uint32_t>(s.size()));
  out += s;
}

struct Reader {
  const std::string& bytes;
  size_t pos = 0;
  std::string where;

  void need(size_t n) const {
    if (pos + n > bytes.size()) throw ValidationError(where + ": truncated index file");
  }
  uint32_t u32() {
    need(4);
    uint32_t v;
    std::memcpy(&v, bytes.data() + pos, 4);
    pos += 4;
    return v;
  }
  double f64() {
    need(8);
    double v;
    std::memcpy(&v, bytes.data() + pos, 8);
    pos += 8;
    return v;
  }
  std::string str() {
    uint32_t n = u32();
    need(n);
    std::string s = bytes.substr(pos, n);
    pos += n;
    return s;
  }
};

}  // namespace

void Bm25Index::save(const std::filesystem::path& path) const {
  std::string out(kIndexMagic, 8);
  put_u32(out, kIndexVersion);
  put_f64(out, params_.k1);
  put_f64(out, params_.b);
  put_u32(out, analyzer_.stem ? 1 : 0);
  put_f64(out, avgdl_);
  put_u32(out, static_cast<uint32_t>(doc_ids_.size()));
  for (size_t i = 0; i < doc_ids_.size(); i++) {
    put_str(out, doc_ids_[i]);
    put_u32(out, doc_len_[i]);
  }
  put_u32(out, static_cast<uint32_t>(postings_.size()));
  for (const auto& [term, plist] : postings_) {
    put_str(out, term);
    put_u32(out, static_cast<uint32_t>(plist.size()));
    for (const Posting& p : plist) {
      put_u32(out, p.doc);
      put_u32(out, p.tf);
    }
  }
  io::write_file_atomic(path, out);
}

Bm25Index Bm25Index::load(const std::filesystem::path& path) {
  std::string bytes = io::read_file(path);
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kIndexMagic, 8) != 0)
    throw ValidationError(path.string() + ": not a BM25 index file (bad magic)");
  Reader r{bytes, 8, path.string()};
  uint32_t version = r.u32();
  if (version != kIndexVersion)
    throw ValidationError(path.string() + ": unsupported index version " +
                          std::to_string(version));
  Bm25Index index;
  index.params_.k1 = r.f64();
  index.params_.b = r.f64();
  index.analyzer_.stem = r.u32() != 0;
  index.avgdl_ = r.f64();
  uint32_t n_docs = r.u32();
  index.doc_ids_.reserve(n_docs);
  index.doc_len_.reserve(n_docs);
  for (uint32_t i = 0; i < n_docs; i++) {
    index.doc_ids_.push_back(r.str());
    index.doc_len_.push_back(r.u32());
  }
  uint32_t n_terms = r.u32();
  for (uint32_t i = 0; i < n_terms; i++) {
    std::string term = r.str();
    uint32_t n_postings = r.u32();
    std::vector<Posting> plist;
    plist.reserve(n_postings);
    for (uint32_t j = 0; j < n_postings; j++) {
      Posting p;
      p.doc = r.u32();
      p.tf = r.u32();
      if (p.doc >= n_docs) throw ValidationError(path.string() + ": posting doc out of range");
      plist.push_back(p);
    }
    index.postings_.emplace(std::move(term), std::move(plist));
  }
  return index;
}

}  // namespace adaqr
