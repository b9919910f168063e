#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace illusion::jsonl {

/// Calls `visit(line, line_number)` for every non-blank line (1-based numbers). Throws IoError if unreadable.
void for_each_line(const std::filesystem::path& path,
                   const std::function<void(std::string_view, std::size_t)>& visit);

/// Replaces the file atomically: writes a sibling temp file, then renames it over `path`.
void write_atomic(const std::filesystem::path& path, std::string_view content);

/// Appends newline-terminated lines under an exclusive advisory lock with a single write.
void append_locked(const std::filesystem::path& path, const std::vector<std::string>& lines);

std::string read_file(const std::filesystem::path& path);

/// "path:line: message", the shape of every malformed-input error.
std::string where(const std::filesystem::path& path, std::size_t line, std::string_view message);

} // namespace illusion::jsonl
