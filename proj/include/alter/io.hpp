#pragma once

#include <cstdint>
#include <string>

#include "alter/matrix.hpp"

namespace alter::io {

/// Shortest text form that round-trips a double exactly ("%.17g" trimmed).
std::string format_double(double v);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);
bool file_exists(const std::string& path);
void ensure_dir(const std::string& path);

Matrix read_csv(const std::string& path);
void write_csv(const std::string& path, const Matrix& m);
std::string csv_string(const Matrix& m);

/// Plain-text (P2) grayscale PGM. Entries are mapped linearly from
/// [0, max entry] to [0, 255]; negative entries clamp to 0.
void write_pgm(const std::string& path, const Matrix& m);

uint64_t file_hash(const std::string& path);
std::string hash_hex(uint64_t h);

}  // namespace alter::io
