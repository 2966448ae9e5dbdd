#include "alter/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <system_error>

namespace alter::io {

std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw std::runtime_error("write failed: " + path);
}

bool file_exists(const std::string& path) {
  std::ifstream in(path);
  return in.good();
}

void ensure_dir(const std::string& path) {
  std::error_code ec;
  std::filesystem::create_directories(path, ec);
  if (ec) throw std::runtime_error("cannot create directory " + path + ": " + ec.message());
}

Matrix read_csv(const std::string& path) {
  std::string text = read_file(path);
  std::vector<double> values;
  int cols = -1;
  int rows = 0;
  size_t pos = 0;
  while (pos < text.size()) {
    size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    std::string_view line(text.data() + pos, eol - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos = eol + 1;
    if (line.empty()) continue;
    int c = 0;
    size_t p = 0;
    while (p <= line.size()) {
      size_t comma = line.find(',', p);
      if (comma == std::string::npos) comma = line.size();
      std::string_view cell = line.substr(p, comma - p);
      double v = 0.0;
      auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (res.ec != std::errc() || res.ptr != cell.data() + cell.size())
        throw std::runtime_error("bad numeric cell in " + path);
      values.push_back(v);
      ++c;
      p = comma + 1;
      if (comma == line.size()) break;
    }
    if (cols < 0) cols = c;
    if (c != cols) throw std::runtime_error("ragged CSV: " + path);
    ++rows;
  }
  if (rows == 0 || cols <= 0) throw std::runtime_error("empty CSV: " + path);
  Matrix m(rows, cols);
  m.data = std::move(values);
  return m;
}

std::string csv_string(const Matrix& m) {
  std::string out;
  out.reserve(m.size() * 12);
  for (int i = 0; i < m.rows; ++i) {
    for (int j = 0; j < m.cols; ++j) {
      if (j) out += ',';
      out += format_double(m(i, j));
    }
    out += '\n';
  }
  return out;
}

void write_csv(const std::string& path, const Matrix& m) {
  write_file(path, csv_string(m));
}

void write_pgm(const std::string& path, const Matrix& m) {
  double maxv = 0.0;
  for (double v : m.data) maxv = std::max(maxv, v);
  std::string out = "P2\n" + std::to_string(m.cols) + " " + std::to_string(m.rows) + "\n255\n";
  for (int i = 0; i < m.rows; ++i) {
    for (int j = 0; j < m.cols; ++j) {
      double v = m(i, j);
      int g = 0;
      if (maxv > 0.0 && v > 0.0) g = static_cast<int>(std::lround(255.0 * v / maxv));
      g = std::clamp(g, 0, 255);
      if (j) out += ' ';
      out += std::to_string(g);
    }
    out += '\n';
  }
  write_file(path, out);
}

uint64_t file_hash(const std::string& path) {
  std::string content = read_file(path);
  return fnv1a64(content.data(), content.size());
}

std::string hash_hex(uint64_t h) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[i] = digits[h & 0xf];
    h >>= 4;
  }
  return s;
}

}  // namespace alter::io
