#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ragprune::csv {

/// Quotes a field when it contains a comma, quote or line break.
std::string field(std::string_view text);

std::string number(double value);
std::string number(const std::optional<double>& value);  // blank when empty

std::string row(const std::vector<std::string>& fields);

/// Truncates `path` and writes `content`.
/// Throws DataError on failure.
void write_file(const std::filesystem::path& path, std::string_view content);

std::string read_file(const std::filesystem::path& path);

}  // namespace ragprune::csv
