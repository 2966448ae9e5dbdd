#pragma once

#include <string>
#include <vector>

#include "alter/autodiff.hpp"

namespace alter {

inline constexpr const char* kCheckpointVersion = "alter-ckpt-1";

/// Checkpoint file: one line of JSON ({"version", "tensors":[{name, rows,
/// cols, offset}]}), a newline, then the concatenated parameter values as
/// little-endian 8-byte floats. Offsets are bytes from the start of the blob.
void save_checkpoint(const std::string& path, const std::vector<const Parameter*>& params);

/// Loads by name into the given parameters; the name sets must match exactly
/// and shapes must agree.
void load_checkpoint(const std::string& path, const std::vector<Parameter*>& params);

}  // namespace alter
