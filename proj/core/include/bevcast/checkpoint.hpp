#pragma once

#include <filesystem>
#include <iosfwd>

#include "bevcast/unet.hpp"

namespace bevcast {

// Binary checkpoint layout (all little-endian):
//   "BEVC" | u32 version | i32 depth | i32 base_features | i32 in_channels |
//   i32 out_channels | u32 terminal | f64 clip_hi | u64 parameter count |
//   parameter count x f32 (layer declaration order, weights then biases)
inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_checkpoint(std::ostream& os, const UNetModel<float>& model);
// Throws std::runtime_error on bad magic, unknown version, an invalid
// configuration, or a payload whose length disagrees with param_count.
UNetModel<float> read_checkpoint(std::istream& is);

void save_checkpoint(const std::filesystem::path& path, const UNetModel<float>& model);
UNetModel<float> load_checkpoint(const std::filesystem::path& path);

}  // namespace bevcast
