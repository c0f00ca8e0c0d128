#include "ddpb/dataset.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <random>
#include <sstream>

#include "ddpb/rng.hpp"

namespace ddpb {

namespace {

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;

std::uint32_t read_be32(std::span<const std::uint8_t> buf, std::size_t off) {
  return (std::uint32_t{buf[off]} << 24) | (std::uint32_t{buf[off + 1]} << 16) |
         (std::uint32_t{buf[off + 2]} << 8) | std::uint32_t{buf[off + 3]};
}

std::string hex(std::uint32_t v) {
  std::ostringstream os;
  os << "0x" << std::hex << v;
  return os.str();
}

std::vector<std::uint8_t> gunzip(const std::vector<std::uint8_t>& in) {
  z_stream zs{};
  if (inflateInit2(&zs, 15 + 32) != Z_OK) {
    throw IdxError(IdxError::Kind::kIo, "zlib init failed");
  }
  zs.next_in = const_cast<Bytef*>(in.data());
  zs.avail_in = static_cast<uInt>(in.size());
  std::vector<std::uint8_t> out;
  std::uint8_t chunk[1 << 15];
  int rc = Z_OK;
  while (rc != Z_STREAM_END) {
    zs.next_out = chunk;
    zs.avail_out = sizeof(chunk);
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      throw IdxError(IdxError::Kind::kTruncated, "corrupt or truncated gzip stream");
    }
    out.insert(out.end(), chunk, chunk + (sizeof(chunk) - zs.avail_out));
    if (rc == Z_OK && zs.avail_in == 0 && zs.avail_out != 0) {
      inflateEnd(&zs);
      throw IdxError(IdxError::Kind::kTruncated, "truncated gzip stream");
    }
  }
  inflateEnd(&zs);
  return out;
}

std::vector<std::size_t> parse_header(std::span<const std::uint8_t> buf,
                                      std::uint32_t magic, std::size_t ndims,
                                      const char* what) {
  if (buf.size() < 4) {
    throw IdxError(IdxError::Kind::kTruncated,
                   std::string(what) + ": truncated header");
  }
  const std::uint32_t got = read_be32(buf, 0);
  if (got != magic) {
    throw IdxError(IdxError::Kind::kBadMagic,
                   std::string(what) + ": bad magic " + hex(got) +
                       " (expected " + hex(magic) + ")");
  }
  if (buf.size() < 4 + 4 * ndims) {
    throw IdxError(IdxError::Kind::kTruncated,
                   std::string(what) + ": truncated header");
  }
  std::vector<std::size_t> dims(ndims);
  std::size_t total = 1;
  for (std::size_t i = 0; i < ndims; ++i) {
    dims[i] = read_be32(buf, 4 + 4 * i);
    total *= dims[i];
  }
  if (buf.size() < 4 + 4 * ndims + total) {
    throw IdxError(IdxError::Kind::kTruncated,
                   std::string(what) + ": truncated payload");
  }
  return dims;
}

}  // namespace

void Dataset::validate() const {
  if (inputs.size() != labels.size() * dim) {
    throw DataError("dataset: input rows do not match label count");
  }
  for (int y : labels) {
    if (y < 0 || y >= num_classes) throw DataError("dataset: label out of range");
  }
}

Dataset Dataset::slice(std::size_t begin, std::size_t end) const {
  if (begin > end || end > size()) throw std::out_of_range("dataset slice");
  Dataset out;
  out.dim = dim;
  out.num_classes = num_classes;
  out.provenance = provenance + "[" + std::to_string(begin) + ":" +
                   std::to_string(end) + "]";
  out.inputs.assign(inputs.begin() + static_cast<long>(begin * dim),
                    inputs.begin() + static_cast<long>(end * dim));
  out.labels.assign(labels.begin() + static_cast<long>(begin),
                    labels.begin() + static_cast<long>(end));
  return out;
}

Dataset Dataset::truncated_to_multiple(std::size_t batch) const {
  if (batch == 0) throw std::invalid_argument("batch must be positive");
  return slice(0, size() - size() % batch);
}

Dataset Dataset::splice_prefix(std::size_t m, const Dataset& tail_source) const {
  if (m > size()) throw std::out_of_range("splice_prefix: m exceeds size");
  if (tail_source.dim != dim) throw DataError("splice_prefix: dimension mismatch");
  const std::size_t need = size() - m;
  if (tail_source.size() < need) {
    throw DataError("ghost pool smaller than n - m (" +
                    std::to_string(tail_source.size()) + " < " +
                    std::to_string(need) + ")");
  }
  Dataset out = slice(0, m);
  out.num_classes = std::max(num_classes, tail_source.num_classes);
  out.inputs.insert(out.inputs.end(), tail_source.inputs.begin(),
                    tail_source.inputs.begin() + static_cast<long>(need * dim));
  out.labels.insert(out.labels.end(), tail_source.labels.begin(),
                    tail_source.labels.begin() + static_cast<long>(need));
  out.provenance = provenance + "[0:" + std::to_string(m) + "]+" +
                   tail_source.provenance;
  return out;
}

std::vector<std::uint8_t> read_maybe_gzip(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IdxError(IdxError::Kind::kIo, "cannot open " + path.string());
  std::vector<std::uint8_t> raw((std::istreambuf_iterator<char>(in)),
                                std::istreambuf_iterator<char>());
  if (raw.size() >= 2 && raw[0] == 0x1f && raw[1] == 0x8b) return gunzip(raw);
  return raw;
}

Dataset parse_idx(std::span<const std::uint8_t> images,
                  std::span<const std::uint8_t> labels) {
  const auto idims = parse_header(images, kImagesMagic, 3, "images");
  const auto ldims = parse_header(labels, kLabelsMagic, 1, "labels");
  if (idims[0] != ldims[0]) {
    throw IdxError(IdxError::Kind::kCountMismatch,
                   "image count " + std::to_string(idims[0]) +
                       " != label count " + std::to_string(ldims[0]));
  }
  Dataset ds;
  ds.dim = idims[1] * idims[2];
  const std::size_t n = idims[0];
  ds.inputs.resize(n * ds.dim);
  const std::uint8_t* pix = images.data() + 16;
  for (std::size_t i = 0; i < ds.inputs.size(); ++i) {
    ds.inputs[i] = static_cast<float>(pix[i]) / 255.0f;
  }
  ds.labels.resize(n);
  int max_label = -1;
  for (std::size_t i = 0; i < n; ++i) {
    ds.labels[i] = labels[8 + i];
    max_label = std::max(max_label, ds.labels[i]);
  }
  ds.num_classes = std::max(10, max_label + 1);
  return ds;
}

Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path) {
  const auto images = read_maybe_gzip(images_path);
  const auto labels = read_maybe_gzip(labels_path);
  Dataset ds = parse_idx(images, labels);
  // FNV-1a over both payloads identifies the source files.
  std::uint64_t h = tag_hash("");
  for (auto* buf : {&images, &labels}) {
    for (std::uint8_t b : *buf) {
      h ^= b;
      h *= 0x100000001b3ULL;
    }
  }
  std::ostringstream os;
  os << "idx:" << images_path.filename().string() << ":" << std::hex << h;
  ds.provenance = os.str();
  return ds;
}

Dataset make_gaussian_pair(const GaussianPairSpec& spec) {
  if (spec.dim == 0) throw ConfigError("gaussian_pair: dim must be positive");
  Rng rng = make_stream(spec.seed, "gaussian_pair");
  std::normal_distribution<double> normal(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);
  Dataset ds;
  ds.dim = spec.dim;
  ds.num_classes = 2;
  ds.inputs.resize(spec.n * spec.dim);
  ds.labels.resize(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) {
    const int y = coin(rng) ? 1 : 0;
    ds.labels[i] = y;
    for (std::size_t c = 0; c < spec.dim; ++c) {
      double v = normal(rng);
      if (c == 0) v += (y == 1 ? 0.5 : -0.5) * spec.separation;
      ds.inputs[i * spec.dim + c] = static_cast<float>(v);
    }
  }
  std::ostringstream os;
  os << "gaussian_pair:n=" << spec.n << ",dim=" << spec.dim
     << ",sep=" << spec.separation << ",seed=" << spec.seed;
  ds.provenance = os.str();
  return ds;
}

Dataset make_toy_data(const ToyDataSpec& spec) {
  if (spec.k_dim == 0 || spec.d_dim == 0) {
    throw ConfigError("example1: K and D must be positive");
  }
  Rng rng = make_stream(spec.seed, "example1");
  std::normal_distribution<double> normal(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);
  const double u_coord = spec.u_norm / std::sqrt(static_cast<double>(spec.k_dim));
  const double x_sd = std::sqrt(spec.sigma_sq / static_cast<double>(spec.d_dim));
  Dataset ds;
  ds.dim = spec.k_dim + spec.d_dim;
  ds.num_classes = 2;
  ds.inputs.resize(spec.n * ds.dim);
  ds.labels.resize(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) {
    const int y = coin(rng) ? 1 : -1;
    ds.labels[i] = (y + 1) / 2;
    float* row = &ds.inputs[i * ds.dim];
    for (std::size_t c = 0; c < spec.k_dim; ++c) {
      row[c] = static_cast<float>(y * u_coord);
    }
    for (std::size_t c = 0; c < spec.d_dim; ++c) {
      row[spec.k_dim + c] = static_cast<float>(x_sd * normal(rng));
    }
  }
  std::ostringstream os;
  os << "example1:n=" << spec.n << ",K=" << spec.k_dim << ",D=" << spec.d_dim
     << ",sigma_sq=" << spec.sigma_sq << ",seed=" << spec.seed;
  ds.provenance = os.str();
  return ds;
}

Dataset synth_dataset(const SynthSpec& spec) {
  if (spec.generator == "gaussian_pair") return make_gaussian_pair(spec.pair);
  if (spec.generator == "example1") return make_toy_data(spec.toy);
  throw ConfigError("unknown generator: " + spec.generator);
}

}  // namespace ddpb
