#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace wcet::io {

/// Whole-file read; throws Error(IoFailure) naming the path.
std::string read_file(const std::filesystem::path& path);

/// Writes to a sibling temporary and renames it over `path`, so a failed
/// write never leaves a truncated file behind.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

/// Shortest decimal that round-trips (at most 17 significant digits).
std::string format_double(double value);

/// Splits one CSV record on commas. No quoting support: none of the
/// toolkit's schemas carry commas inside cells.
std::vector<std::string> split_csv_line(std::string_view line);

std::string_view trim(std::string_view text);

}  // namespace wcet::io
