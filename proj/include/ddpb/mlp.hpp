#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "ddpb/dataset.hpp"

namespace ddpb {

/// Fully connected ReLU network shape. Parameters live in one flat vector,
/// layer by layer: the fan_out x fan_in weight matrix (row-major), then the
/// fan_out biases.
class Architecture {
 public:
  Architecture() = default;
  explicit Architecture(std::vector<int> layer_sizes);

  const std::vector<int>& layer_sizes() const { return sizes_; }
  std::size_t num_layers() const { return sizes_.size() - 1; }
  std::size_t parameter_count() const { return total_; }
  int input_dim() const { return sizes_.front(); }
  int num_classes() const { return sizes_.back(); }
  int fan_in(std::size_t layer) const { return sizes_[layer]; }
  int fan_out(std::size_t layer) const { return sizes_[layer + 1]; }
  std::size_t weight_offset(std::size_t layer) const { return offsets_[layer]; }
  std::size_t bias_offset(std::size_t layer) const {
    return offsets_[layer] +
           static_cast<std::size_t>(fan_in(layer)) * fan_out(layer);
  }

  void check_dataset(const Dataset& data) const;

 private:
  std::vector<int> sizes_;
  std::vector<std::size_t> offsets_;
  std::size_t total_ = 0;
};

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;

/// Scratch buffers reused across calls.
template <typename T>
struct Workspace {
  std::vector<Mat<T>> pre;   // pre-activations per layer
  std::vector<Mat<T>> act;   // act[0] = input batch, act[l+1] = layer output
  Mat<T> delta;
};

/// Mean over `batch` of cross-entropy / ln(C), a [0,1]-scaled surrogate of
/// the 0-1 loss. Writes the exact gradient into `grad` when it is nonempty.
/// Throws NumericError on non-finite activations.
template <typename T>
T forward_backward(const Architecture& arch, std::span<const T> weights,
                   const Dataset& data, std::span<const std::size_t> batch,
                   std::span<T> grad, Workspace<T>& ws);

template <typename T>
T forward_backward(const Architecture& arch, std::span<const T> weights,
                   const Dataset& data, std::span<const std::size_t> batch,
                   std::span<T> grad) {
  Workspace<T> ws;
  return forward_backward(arch, weights, data, batch, grad, ws);
}

/// Fraction of rows in [begin, end) whose argmax prediction is wrong.
template <typename T>
double zero_one_error(const Architecture& arch, std::span<const T> weights,
                      const Dataset& data, std::size_t begin, std::size_t end);

template <typename T>
double zero_one_error(const Architecture& arch, std::span<const T> weights,
                      const Dataset& data) {
  return zero_one_error(arch, weights, data, 0, data.size());
}

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
std::vector<float> init_weights(const Architecture& arch, std::uint64_t seed);

std::vector<double> to_double(std::span<const float> w);
std::vector<float> to_float(std::span<const double> w);

}  // namespace ddpb
