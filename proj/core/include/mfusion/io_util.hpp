#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace mfusion::io {

// Writes via a sibling temp file and renames on success, so a failed command
// never leaves a partial output behind.
void atomic_write(const std::filesystem::path& path, const std::string& content);
void atomic_write(const std::filesystem::path& path,
                  const std::function<void(std::ostream&)>& writer);

std::string read_file(const std::filesystem::path& path);

// All lines of a text file, without trailing newlines. Throws IoError if the
// file cannot be opened.
std::vector<std::string> read_lines(const std::filesystem::path& path);

}  // namespace mfusion::io
