#include "ddpb/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "ddpb/error.hpp"
#include "ddpb/mlp.hpp"

namespace ddpb {

namespace {

constexpr char kMagic[4] = {'D', 'D', 'P', 'C'};

void put_le(std::vector<std::uint8_t>& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_le(const std::vector<std::uint8_t>& in, std::size_t& off,
                     int bytes) {
  if (off + static_cast<std::size_t>(bytes) > in.size()) {
    throw DataError("checkpoint: truncated");
  }
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= std::uint64_t{in[off + i]} << (8 * i);
  off += static_cast<std::size_t>(bytes);
  return v;
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  const Architecture arch(ckpt.layer_sizes);
  if (arch.parameter_count() != ckpt.weights.size()) {
    throw std::invalid_argument("checkpoint: weights do not match layer sizes");
  }
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  put_le(out, kCheckpointVersion, 4);
  put_le(out, ckpt.layer_sizes.size(), 4);
  for (int s : ckpt.layer_sizes) put_le(out, static_cast<std::uint32_t>(s), 4);
  put_le(out, ckpt.weights.size(), 8);
  for (float w : ckpt.weights) put_le(out, std::bit_cast<std::uint32_t>(w), 4);
  return out;
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw DataError("checkpoint: bad magic");
  }
  std::size_t off = 4;
  const auto version = get_le(bytes, off, 4);
  if (version != kCheckpointVersion) {
    throw DataError("checkpoint: unsupported version " + std::to_string(version));
  }
  Checkpoint ckpt;
  const auto layers = get_le(bytes, off, 4);
  for (std::uint64_t i = 0; i < layers; ++i) {
    ckpt.layer_sizes.push_back(static_cast<int>(get_le(bytes, off, 4)));
  }
  const auto count = get_le(bytes, off, 8);
  if (bytes.size() - off != count * 4) {
    throw DataError("checkpoint: payload length does not match header");
  }
  ckpt.weights.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    ckpt.weights.push_back(
        std::bit_cast<float>(static_cast<std::uint32_t>(get_le(bytes, off, 4))));
  }
  if (Architecture(ckpt.layer_sizes).parameter_count() != count) {
    throw DataError("checkpoint: parameter count does not match layer sizes");
  }
  return ckpt;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const auto bytes = encode_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace ddpb
