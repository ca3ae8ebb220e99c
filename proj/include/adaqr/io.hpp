#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace adaqr::io {

/// Read a whole file into memory. Missing/unreadable file -> IoError.
std::string read_file(const std::filesystem::path& path);

/// Write via a temporary file in the same directory, then rename into place,
/// so a crash never leaves a partially written final artifact.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

/// Parse a line-delimited JSON file. Calls `fn(line_number, parsed)` for every
/// non-empty line; malformed JSON raises ValidationError naming the line.
void for_each_jsonl(const std::filesystem::path& path,
                    const std::function<void(size_t, const nlohmann::json&)>& fn);

/// FNV-1a 64-bit over a byte string.
uint64_t fnv1a64(const std::string& bytes, uint64_t seed = 14695981039346656037ull);

/// Hash of a file's contents, as a fixed-width hex string.
std::string file_digest(const std::filesystem::path& path);

}  // namespace adaqr::io
