#pragma once

#include <string>
#include <vector>

namespace adaqr::text {

/// Lowercase a single ASCII string.
std::string lowercase(const std::string& s);

/// Split into lowercase alphanumeric tokens (non-alphanumeric runs are
/// separators). Shared by the BM25 analyzer, the token-F1 overlap measure,
/// and the mock scorer.
std::vector<std::string> tokenize(const std::string& s);

/// Porter stemmer for English. Input is expected to be a lowercase token.
std::string porter_stem(const std::string& word);

/// tokenize() followed by optional stemming.
std::vector<std::string> analyze(const std::string& s, bool stem);

}  // namespace adaqr::text
