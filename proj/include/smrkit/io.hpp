#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace smrkit {

// Formats a double with 9 significant digits. All numeric file output goes
// through this so golden files stay stable across platforms.
std::string format_num(double v);

// Round-trips a value through format_num so JSON documents carry the same
// 9-significant-digit precision as CSV output.
double round_num(double v);

// Writes content to path atomically (temp file in the same directory, then
// rename). Partial runs never leave a corrupt file behind.
void write_file_atomic(const std::filesystem::path& path,
                       const std::string& content);

std::string read_file(const std::filesystem::path& path);

// Splits one CSV line on commas. Ingest validation rejects ids containing
// commas or quotes, so no quoting layer is needed.
std::vector<std::string> split_csv_line(const std::string& line);

}  // namespace smrkit
