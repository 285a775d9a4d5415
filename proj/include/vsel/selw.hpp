#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "vsel/graph.hpp"

namespace vsel {

/// Reader/writer for the SELW weight container.
///
/// Layout (little endian): "SELW", u32 version = 1, u32 tensor count, then per
/// tensor: u16 name length, UTF-8 name, u8 ndim, ndim x u32 dims, f32 payload.
namespace selw {

inline constexpr std::uint32_t kVersion = 1;

WeightStore read(const std::filesystem::path& path);
WeightStore parse(const std::vector<unsigned char>& bytes);

/// Values are narrowed to f32; tensors are written in name order.
std::vector<unsigned char> serialize(const WeightStore& weights);
void write(const std::filesystem::path& path, const WeightStore& weights);

}  // namespace selw
}  // namespace vsel
