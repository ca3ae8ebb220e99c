#include "adaqr/ranked_list.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "adaqr/error.hpp"
#include "adaqr/io.hpp"

namespace adaqr {

void validate_ranked_list(const RankedList& list) {
  std::set<std::string> seen;
  for (size_t i = 0; i < list.entries.size(); i++) {
    const RankedEntry& e = list.entries[i];
    if (e.rank != static_cast<int>(i) + 1)
      throw ValidationError("ranked list " + list.query_id + ": ranks not contiguous at position " +
                            std::to_string(i + 1));
    if (i > 0 && e.score > list.entries[i - 1].score)
      throw ValidationError("ranked list " + list.query_id + ": scores increase at rank " +
                            std::to_string(e.rank));
    if (!seen.insert(e.passage_id).second)
      throw ValidationError("ranked list " + list.query_id + ": duplicate passage id " +
                            e.passage_id);
  }
}

RetrievalDistribution retrieval_distribution(const RankedList& list, int k, double temperature) {
  if (list.entries.empty())
    throw ValidationError("ranked list " + list.query_id +
                          " is empty: no distribution, skip this candidate");
  if (k < 1) throw ValidationError("retrieval distribution requires k >= 1");
  if (!(temperature > 0.0)) throw ValidationError("softmax temperature must be > 0");

  size_t n = std::min(static_cast<size_t>(k), list.entries.size());
  double max_score = list.entries[0].score;
  for (size_t i = 1; i < n; i++) max_score = std::max(max_score, list.entries[i].score);

  RetrievalDistribution dist;
  dist.query_id = list.query_id;
  dist.weights.reserve(n);
  double sum = 0.0;
  for (size_t i = 0; i < n; i++) {
    double w = std::exp((list.entries[i].score - max_score) / temperature);
    sum += w;
    dist.weights.emplace_back(list.entries[i].passage_id, w);
  }
  for (auto& [id, w] : dist.weights) w /= sum;
  return dist;
}

void write_trec_run(const std::vector<RankedList>& run, const std::filesystem::path& path,
                    const std::string& tag) {
  std::string out;
  char buf[64];
  for (const RankedList& list : run) {
    validate_ranked_list(list);
    for (const RankedEntry& e : list.entries) {
      std::snprintf(buf, sizeof(buf), "%d %.17g", e.rank, e.score);
      out += list.query_id;
      out += " Q0 ";
      out += e.passage_id;
      out += ' ';
      out += buf;
      out += ' ';
      out += tag;
      out += '\n';
    }
  }
  io::write_file_atomic(path, out);
}

std::vector<RankedList> read_trec_run(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open run file: " + path.string());
  std::vector<RankedList> run;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    line_no++;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string qid, q0, pid, tag;
    int rank = 0;
    double score = 0.0;
    if (!(ss >> qid >> q0 >> pid >> rank >> score >> tag))
      throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                            ": malformed run line");
    if (run.empty() || run.back().query_id != qid) {
      run.push_back(RankedList{qid, {}});
    }
    run.back().entries.push_back(RankedEntry{pid, score, rank});
  }
  for (const RankedList& list : run) validate_ranked_list(list);
  return run;
}

}  // namespace adaqr
