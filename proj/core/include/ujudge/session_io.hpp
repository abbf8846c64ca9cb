#pragma once

// Canonical session and judgment files: newline-delimited JSON, one record
// per line, keys named exactly as the struct fields. Absent optionals are
// written as null.

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ujudge/session.hpp"

namespace ujudge {

std::string session_to_line(const TaskSession& s);
/// Throws DataError on malformed input.
TaskSession session_from_line(std::string_view line);

std::string judgment_to_line(const Judgment& j);
Judgment judgment_from_line(std::string_view line);

void write_sessions(const std::filesystem::path& path, std::span<const TaskSession> sessions);
std::vector<TaskSession> read_sessions(const std::filesystem::path& path);

void write_judgments(const std::filesystem::path& path, std::span<const Judgment> judgments);
std::vector<Judgment> read_judgments(const std::filesystem::path& path);

/// Writes to a sibling temp file and renames over `path`, so readers never
/// observe a partially written file.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);
std::string read_file(const std::filesystem::path& path);

}  // namespace ujudge
