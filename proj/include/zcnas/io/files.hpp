#pragma once

#include <string>

namespace zc {

// Writes to a temporary sibling, then renames over `path`.
void write_file_atomic(const std::string& path, const std::string& content);
// Appends one line and flushes; used for incremental record logs.
void append_line(const std::string& path, const std::string& line);
std::string read_file(const std::string& path);
bool file_exists(const std::string& path);
void ensure_directory(const std::string& path);

std::string sha256_hex(const std::string& data);
std::string file_sha256(const std::string& path);

// Shortest decimal that round-trips; "nan"/"inf"/"-inf" otherwise.
std::string format_double(double v);

}  // namespace zc
