#pragma once

#include <cstdint>
#include <filesystem>

namespace ragprune::cli {

/// Writes a self-contained offline example under `dir`: corpus.jsonl (17
/// clustered documents and 3 far ones, ids off0..off2), cache.jsonl holding
/// the query and every triple text, triples.jsonl and config.json.
void write_demo_data(const std::filesystem::path& dir, std::uint64_t seed = 7);

}  // namespace ragprune::cli
