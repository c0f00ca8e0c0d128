#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ddpb/error.hpp"

namespace ddpb {

/// Row-major n x d float features with integer class labels.
struct Dataset {
  std::vector<float> inputs;
  std::vector<int> labels;
  std::size_t dim = 0;
  int num_classes = 0;
  std::string provenance;

  std::size_t size() const { return labels.size(); }
  bool empty() const { return labels.empty(); }
  std::span<const float> row(std::size_t i) const {
    return {inputs.data() + i * dim, dim};
  }

  void validate() const;

  /// Rows [begin, end).
  Dataset slice(std::size_t begin, std::size_t end) const;
  /// Truncates to the largest multiple of `batch`.
  Dataset truncated_to_multiple(std::size_t batch) const;
  /// this[0:m) followed by other[0:size()-m); used for S^G_alpha.
  Dataset splice_prefix(std::size_t m, const Dataset& tail_source) const;
};

class IdxError : public DataError {
 public:
  enum class Kind { kBadMagic, kTruncated, kCountMismatch, kIo };
  IdxError(Kind kind, const std::string& what) : DataError(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Reads raw bytes, transparently inflating gzip input.
std::vector<std::uint8_t> read_maybe_gzip(const std::filesystem::path& path);

/// Parses an IDX image/label file pair (magic 0x803 / 0x801, big-endian
/// dimensions). Pixels are scaled to [0,1].
Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path);

/// Same, operating on in-memory buffers.
Dataset parse_idx(std::span<const std::uint8_t> images,
                  std::span<const std::uint8_t> labels);

/// Two spherical Gaussian classes in `dim` dimensions whose means sit at
/// +/- separation/2 along the first axis. Bayes risk Phi(-separation/2).
struct GaussianPairSpec {
  std::size_t n = 2000;
  std::size_t dim = 20;
  double separation = 2.0;
  std::uint64_t seed = 0;
};

/// Example-style data: x = (y u, x2), x2 ~ N(0, sigma^2/D I_D), labels
/// y in {-1,+1} stored as {0,1}.
struct ToyDataSpec {
  std::size_t n = 100;
  std::size_t k_dim = 1;
  std::size_t d_dim = 1000;
  double sigma_sq = 64.0;
  double u_norm = 1.0;
  std::uint64_t seed = 0;
};

Dataset make_gaussian_pair(const GaussianPairSpec& spec);
Dataset make_toy_data(const ToyDataSpec& spec);

/// Generator dispatch by name: "gaussian_pair" or "example1".
/// Unknown names raise ConfigError.
struct SynthSpec {
  std::string generator;
  GaussianPairSpec pair;
  ToyDataSpec toy;
};

Dataset synth_dataset(const SynthSpec& spec);

}  // namespace ddpb
