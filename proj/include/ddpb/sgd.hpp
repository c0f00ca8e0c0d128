#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ddpb/dataset.hpp"
#include "ddpb/mlp.hpp"

namespace ddpb {

/// Seeded data order shared by the base, prefix, and ghost runs.
///
/// Epoch 1 visits a permutation of the prefix [0, m) followed by a
/// permutation of [m, n). Later full-data epochs reshuffle all of [0, n);
/// later prefix-only epochs reshuffle [0, m). The epoch-1 prefix order
/// depends only on (seed, m), so every run sharing them agrees on it.
class DataOrder {
 public:
  DataOrder(std::uint64_t seed, std::size_t n, std::size_t m);

  /// Seed for prefix-only epochs after the first; defaults to `seed`.
  DataOrder with_prefix_shuffle_seed(std::uint64_t seed) const;

  std::uint64_t seed() const { return seed_; }
  std::size_t n() const { return n_; }
  std::size_t m() const { return m_; }

  /// 1-based epoch.
  std::vector<std::size_t> full_epoch(std::size_t epoch) const;
  std::vector<std::size_t> prefix_epoch(std::size_t epoch) const;

 private:
  std::uint64_t seed_;
  std::uint64_t prefix_seed_;
  std::size_t n_;
  std::size_t m_;
};

struct RunSpec {
  double alpha = 0.0;
  std::size_t batch = 50;
  /// Stop once the 0-1 training error is at most epsilon (checked at epoch
  /// boundaries).
  std::optional<double> epsilon;
  /// Hard cap on total steps, counted from the start of coupling.
  std::size_t max_steps = 100000;
  double learning_rate = 0.01;
  double momentum = 0.95;

  /// Requires b | n and b | floor(alpha n).
  void validate(std::size_t n) const;
  std::size_t prefix_size(std::size_t n) const;
};

/// Weights, momentum buffer, and global step counter.
struct SgdState {
  std::vector<float> weights;
  std::vector<float> velocity;
  std::size_t steps = 0;

  static SgdState start(std::vector<float> w0);
};

/// v <- momentum v + g; w <- w - lr v.
void sgd_step(SgdState& state, std::span<const float> grad,
              double learning_rate, double momentum);

struct RunTrace {
  std::map<std::string, std::vector<float>> checkpoints;
  std::size_t step_count = 0;
  double final_train_error = 1.0;
  SgdState final_state;

  const std::vector<float>& at(const std::string& name) const;
};

std::string prefix_checkpoint_name(std::size_t t);
std::string ghost_checkpoint_name(std::size_t t);

/// Which index stream a run draws minibatches from.
enum class Schedule { kFullData, kPrefixOnly };

struct RunControl {
  Schedule schedule = Schedule::kFullData;
  bool stop_on_epsilon = false;
  std::size_t stop_at_step = 0;  ///< 0 means spec.max_steps
  std::vector<std::size_t> snapshot_steps;
  std::string snapshot_tag;
};

/// Algorithm-2 style SGD continuing from `state`. Only rows the schedule
/// visits are read (kPrefixOnly never touches rows >= m).
RunTrace sgd_continue(const Architecture& arch, SgdState state,
                      const Dataset& data, const DataOrder& order,
                      const RunSpec& spec, const RunControl& control);

/// First m/b steps over the prefix in seeded order. Returns `w_init`
/// untouched when m = 0.
SgdState coupling_run(const Architecture& arch, std::vector<float> w_init,
                      const Dataset& data, const DataOrder& order,
                      const RunSpec& spec);

/// Continues a coupled state on all of S until epsilon or the step cap.
/// Checkpoints: coupling_end, base_end.
RunTrace base_run(const Architecture& arch, const SgdState& coupled,
                  const Dataset& data, const DataOrder& order,
                  const RunSpec& spec);

/// Continues a coupled state on S_alpha alone, snapshotting at each total
/// step count in `t_grid`. Checkpoints: prefix_T<t>.
RunTrace prefix_run(const Architecture& arch, const SgdState& coupled,
                    const Dataset& data, const DataOrder& order,
                    const RunSpec& spec, const std::vector<std::size_t>& t_grid);

/// Trains on S^G_alpha = S_alpha followed by ghost rows, in the base-run
/// order. Checkpoints: ghost_T<t>.
RunTrace ghost_run(const Architecture& arch, const SgdState& coupled,
                   const Dataset& data, const Dataset& ghost_pool,
                   const DataOrder& order, const RunSpec& spec,
                   const std::vector<std::size_t>& t_grid);

/// Coupling followed by the base run; the plain SGD of Algorithm 2.
RunTrace sgd_run(const Architecture& arch, std::vector<float> w0,
                 const Dataset& data, const DataOrder& order,
                 const RunSpec& spec);

}  // namespace ddpb
