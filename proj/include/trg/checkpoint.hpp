#pragma once

#include <string>
#include <utility>
#include <vector>

#include "trg/tensor.hpp"

namespace trg {

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

/// TRGW: "TRGW", u16 version, then records of
/// (u16 name length, name bytes, u8 rank, u32 extents, f32 row-major payload) until EOF.
inline constexpr std::uint16_t kCheckpointVersion = 1;

void write_checkpoint(const std::string& path, const NamedTensors& tensors);
NamedTensors read_checkpoint(const std::string& path);

}  // namespace trg
