#pragma once

#include <string>
#include <vector>

namespace fsgrpo {

// Writes via a temp file in the same directory followed by a rename, so a
// crash never leaves a half-written artifact. Creates parent directories.
void write_file_atomic(const std::string& path, const std::string& content);

std::string read_file(const std::string& path);  // throws std::runtime_error

// Round-trip-exact decimal rendering for CSV cells; the fixed format keeps
// reruns byte-identical.
std::string format_double(double v);

}  // namespace fsgrpo
