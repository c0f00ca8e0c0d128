#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace ddpb {

/// Checkpoint file layout, all integers little-endian:
///
///   offset 0   char[4]  magic "DDPC"
///   offset 4   u32      format version (1)
///   offset 8   u32      L, number of layer sizes
///   offset 12  u32[L]   layer sizes
///   then       u64      parameter count P
///   then       f32[P]   flat weights (IEEE-754 binary32, little-endian)
struct Checkpoint {
  std::vector<int> layer_sizes;
  std::vector<float> weights;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace ddpb
