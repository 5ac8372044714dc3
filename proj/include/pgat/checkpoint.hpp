#pragma once

#include <string>

#include "pgat/agnn.hpp"

namespace pgat {

// Versioned binary checkpoint:
//   "PGAT" | u32 version | u32 E | u32 L | u32 h | f64 created_unix_s |
//   all parameter tensors in tensor_refs() order as raw little-endian f64 |
//   u64 FNV-1a checksum of everything before it.
// A text manifest (same path + ".manifest.txt") lists tensor names and shapes.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::string& path, const ModelParams& model,
                     double created_unix_s = 0.0);

ModelParams load_checkpoint(const std::string& path);

void write_manifest(const std::string& path, const ModelParams& model);

} // namespace pgat
