#pragma once

#include <filesystem>
#include <string>

#include "anonact/model/transformer.hpp"

namespace anonact::model {

// Binary layout (all integers and floats little-endian):
//   "ANONACTM" | u32 version | config: u64 vocab, d_model, n_layers, n_heads,
//   context_len, seed | u32 tensor count | per tensor: u32 name length, name
//   bytes, u32 rank, u64 dims[rank], f32 data[prod(dims)]
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const Model& model, const std::filesystem::path& path);

// Throws FormatError on bad magic, version mismatch, truncation, or a tensor
// set that does not match the config's layout.
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace anonact::model
