#include "alter/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "alter/io.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint blobs are written as native little-endian doubles");

namespace alter {

using nlohmann::json;

void save_checkpoint(const std::string& path, const std::vector<const Parameter*>& params) {
  json tensors = json::array();
  size_t offset = 0;
  for (const Parameter* p : params) {
    tensors.push_back({{"name", p->name},
                       {"rows", p->value.rows},
                       {"cols", p->value.cols},
                       {"offset", offset}});
    offset += p->value.size() * sizeof(double);
  }
  json header = {{"version", kCheckpointVersion}, {"tensors", tensors}};
  std::string out = header.dump();
  out += '\n';
  const size_t blob_start = out.size();
  out.resize(blob_start + offset);
  size_t pos = blob_start;
  for (const Parameter* p : params) {
    const size_t bytes = p->value.size() * sizeof(double);
    std::memcpy(out.data() + pos, p->value.data.data(), bytes);
    pos += bytes;
  }
  io::write_file(path, out);
}

void load_checkpoint(const std::string& path, const std::vector<Parameter*>& params) {
  const std::string content = io::read_file(path);
  const size_t nl = content.find('\n');
  if (nl == std::string::npos) throw std::runtime_error("checkpoint: missing header line");
  json header = json::parse(content.substr(0, nl));
  if (header.at("version").get<std::string>() != kCheckpointVersion)
    throw std::runtime_error("checkpoint: unsupported version");
  const char* blob = content.data() + nl + 1;
  const size_t blob_size = content.size() - nl - 1;

  std::set<std::string> seen;
  for (const auto& t : header.at("tensors")) {
    const std::string name = t.at("name").get<std::string>();
    Parameter* target = nullptr;
    for (Parameter* p : params)
      if (p->name == name) {
        target = p;
        break;
      }
    if (!target) throw std::runtime_error("checkpoint: unexpected tensor '" + name + "'");
    if (!seen.insert(name).second)
      throw std::runtime_error("checkpoint: duplicate tensor '" + name + "'");
    const int rows = t.at("rows").get<int>();
    const int cols = t.at("cols").get<int>();
    if (rows != target->value.rows || cols != target->value.cols)
      throw std::runtime_error("checkpoint: shape mismatch for '" + name + "'");
    const size_t offset = t.at("offset").get<size_t>();
    const size_t bytes = target->value.size() * sizeof(double);
    if (offset + bytes > blob_size)
      throw std::runtime_error("checkpoint: truncated blob for '" + name + "'");
    std::memcpy(target->value.data.data(), blob + offset, bytes);
    if (!target->value.all_finite())
      throw std::runtime_error("checkpoint: non-finite values in '" + name + "'");
  }
  if (seen.size() != params.size())
    throw std::runtime_error("checkpoint: missing tensors for some parameters");
}

}  // namespace alter
