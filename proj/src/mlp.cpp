#include "ddpb/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

#include "ddpb/error.hpp"
#include "ddpb/rng.hpp"

namespace ddpb {

namespace {

template <typename T>
using RowMajorMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
void load_batch(const Dataset& data, std::span<const std::size_t> batch,
                Mat<T>& x) {
  x.resize(static_cast<Eigen::Index>(data.dim),
           static_cast<Eigen::Index>(batch.size()));
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto row = data.row(batch[b]);
    for (std::size_t c = 0; c < data.dim; ++c) {
      x(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(b)) =
          static_cast<T>(row[c]);
    }
  }
}

template <typename T>
void load_range(const Dataset& data, std::size_t begin, std::size_t end,
                Mat<T>& x) {
  const auto d = static_cast<Eigen::Index>(data.dim);
  const auto cols = static_cast<Eigen::Index>(end - begin);
  x = Eigen::Map<const Mat<float>>(data.inputs.data() + begin * data.dim, d, cols)
          .template cast<T>();
}

template <typename T>
void forward(const Architecture& arch, std::span<const T> w, Workspace<T>& ws) {
  const std::size_t layers = arch.num_layers();
  ws.pre.resize(layers);
  ws.act.resize(layers + 1);
  for (std::size_t l = 0; l < layers; ++l) {
    const Eigen::Map<const RowMajorMat<T>> weight(
        w.data() + arch.weight_offset(l), arch.fan_out(l), arch.fan_in(l));
    const Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> bias(
        w.data() + arch.bias_offset(l), arch.fan_out(l));
    ws.pre[l].noalias() = weight * ws.act[l];
    ws.pre[l].colwise() += bias;
    if (l + 1 < layers) {
      ws.act[l + 1] = ws.pre[l].cwiseMax(T(0));
    }
  }
}

}  // namespace

Architecture::Architecture(std::vector<int> layer_sizes)
    : sizes_(std::move(layer_sizes)) {
  if (sizes_.size() < 2) {
    throw std::invalid_argument("architecture needs at least two layer sizes");
  }
  for (int s : sizes_) {
    if (s <= 0) throw std::invalid_argument("layer sizes must be positive");
  }
  if (sizes_.back() < 2) {
    throw std::invalid_argument("output layer needs at least two classes");
  }
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    offsets_.push_back(total_);
    total_ += static_cast<std::size_t>(sizes_[l] + 1) * sizes_[l + 1];
  }
}

void Architecture::check_dataset(const Dataset& data) const {
  if (static_cast<std::size_t>(input_dim()) != data.dim) {
    throw DataError("input dimension " + std::to_string(data.dim) +
                                " does not match layer_sizes[0] = " +
                                std::to_string(input_dim()));
  }
  if (data.num_classes > num_classes()) {
    throw DataError("dataset has more classes than the output layer");
  }
}

template <typename T>
T forward_backward(const Architecture& arch, std::span<const T> weights,
                   const Dataset& data, std::span<const std::size_t> batch,
                   std::span<T> grad, Workspace<T>& ws) {
  if (weights.size() != arch.parameter_count()) {
    throw std::invalid_argument("weight vector has wrong length");
  }
  if (batch.empty()) throw std::invalid_argument("empty minibatch");
  arch.check_dataset(data);
  const std::size_t layers = arch.num_layers();
  ws.act.resize(layers + 1);
  load_batch(data, batch, ws.act[0]);
  forward(arch, weights, ws);

  const Mat<T>& logits = ws.pre[layers - 1];
  const auto classes = logits.rows();
  const auto cols = logits.cols();
  const T log_c = std::log(static_cast<T>(arch.num_classes()));
  const T inv_scale = T(1) / (static_cast<T>(cols) * log_c);

  // Softmax, loss, and dLoss/dlogits in one pass.
  ws.delta.resize(classes, cols);
  T loss = 0;
  for (Eigen::Index b = 0; b < cols; ++b) {
    const T mx = logits.col(b).maxCoeff();
    T denom = 0;
    for (Eigen::Index c = 0; c < classes; ++c) {
      const T e = std::exp(logits(c, b) - mx);
      ws.delta(c, b) = e;
      denom += e;
    }
    const int y = data.labels[batch[static_cast<std::size_t>(b)]];
    loss += -(logits(y, b) - mx - std::log(denom));
    for (Eigen::Index c = 0; c < classes; ++c) {
      ws.delta(c, b) = (ws.delta(c, b) / denom - (c == y ? T(1) : T(0))) * inv_scale;
    }
  }
  loss /= static_cast<T>(cols) * log_c;
  if (!std::isfinite(loss)) {
    throw NumericError("non-finite loss in forward pass");
  }
  if (grad.empty()) return loss;
  if (grad.size() != arch.parameter_count()) {
    throw std::invalid_argument("gradient buffer has wrong length");
  }

  for (std::size_t l = layers; l-- > 0;) {
    Eigen::Map<RowMajorMat<T>> gw(grad.data() + arch.weight_offset(l),
                                  arch.fan_out(l), arch.fan_in(l));
    Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> gb(
        grad.data() + arch.bias_offset(l), arch.fan_out(l));
    gw.noalias() = ws.delta * ws.act[l].transpose();
    gb = ws.delta.rowwise().sum();
    if (l == 0) break;
    const Eigen::Map<const RowMajorMat<T>> weight(
        weights.data() + arch.weight_offset(l), arch.fan_out(l), arch.fan_in(l));
    Mat<T> back = weight.transpose() * ws.delta;
    ws.delta = back.cwiseProduct(
        (ws.pre[l - 1].array() > T(0)).matrix().template cast<T>());
  }
  return loss;
}

template <typename T>
double zero_one_error(const Architecture& arch, std::span<const T> weights,
                      const Dataset& data, std::size_t begin, std::size_t end) {
  if (weights.size() != arch.parameter_count()) {
    throw std::invalid_argument("weight vector has wrong length");
  }
  if (begin >= end || end > data.size()) {
    throw std::invalid_argument("zero_one_error: empty or invalid range");
  }
  arch.check_dataset(data);
  constexpr std::size_t kChunk = 2048;
  Workspace<T> ws;
  ws.act.resize(arch.num_layers() + 1);
  std::size_t mistakes = 0;
  for (std::size_t lo = begin; lo < end; lo += kChunk) {
    const std::size_t hi = std::min(end, lo + kChunk);
    load_range(data, lo, hi, ws.act[0]);
    forward(arch, weights, ws);
    const Mat<T>& logits = ws.pre.back();
    for (Eigen::Index b = 0; b < logits.cols(); ++b) {
      Eigen::Index arg = 0;
      logits.col(b).maxCoeff(&arg);
      if (static_cast<int>(arg) != data.labels[lo + static_cast<std::size_t>(b)]) {
        ++mistakes;
      }
    }
  }
  return static_cast<double>(mistakes) / static_cast<double>(end - begin);
}

std::vector<float> init_weights(const Architecture& arch, std::uint64_t seed) {
  Rng rng = make_stream(seed, "init");
  std::vector<float> w(arch.parameter_count());
  for (std::size_t l = 0; l < arch.num_layers(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(arch.fan_in(l)));
    std::uniform_real_distribution<double> uni(-bound, bound);
    const std::size_t end = arch.bias_offset(l) + arch.fan_out(l);
    for (std::size_t i = arch.weight_offset(l); i < end; ++i) {
      w[i] = static_cast<float>(uni(rng));
    }
  }
  return w;
}

std::vector<double> to_double(std::span<const float> w) {
  return {w.begin(), w.end()};
}

std::vector<float> to_float(std::span<const double> w) {
  std::vector<float> out(w.size());
  std::transform(w.begin(), w.end(), out.begin(),
                 [](double v) { return static_cast<float>(v); });
  return out;
}

template float forward_backward<float>(const Architecture&, std::span<const float>,
                                       const Dataset&, std::span<const std::size_t>,
                                       std::span<float>, Workspace<float>&);
template double forward_backward<double>(const Architecture&, std::span<const double>,
                                         const Dataset&, std::span<const std::size_t>,
                                         std::span<double>, Workspace<double>&);
template double zero_one_error<float>(const Architecture&, std::span<const float>,
                                      const Dataset&, std::size_t, std::size_t);
template double zero_one_error<double>(const Architecture&, std::span<const double>,
                                       const Dataset&, std::size_t, std::size_t);

}  // namespace ddpb
