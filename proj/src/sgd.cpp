#include "ddpb/sgd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "ddpb/error.hpp"
#include "ddpb/rng.hpp"
#include "ddpb/toy_model.hpp"

namespace ddpb {

namespace {

std::vector<std::size_t> permutation(std::size_t begin, std::size_t end,
                                     std::uint64_t seed, std::string_view tag,
                                     std::uint64_t epoch) {
  std::vector<std::size_t> idx(end - begin);
  std::iota(idx.begin(), idx.end(), begin);
  Rng rng = make_stream(seed, tag, epoch);
  // Fisher-Yates with an explicit draw so the order does not depend on the
  // standard library's shuffle.
  for (std::size_t i = idx.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

bool all_finite(std::span<const float> w) {
  return std::all_of(w.begin(), w.end(), [](float v) { return std::isfinite(v); });
}

}  // namespace

DataOrder::DataOrder(std::uint64_t seed, std::size_t n, std::size_t m)
    : seed_(seed), prefix_seed_(seed), n_(n), m_(m) {
  if (m > n) throw std::invalid_argument("DataOrder: m exceeds n");
}

DataOrder DataOrder::with_prefix_shuffle_seed(std::uint64_t seed) const {
  DataOrder copy = *this;
  copy.prefix_seed_ = seed;
  return copy;
}

std::vector<std::size_t> DataOrder::full_epoch(std::size_t epoch) const {
  if (epoch == 0) throw std::invalid_argument("epochs are 1-based");
  if (epoch == 1) {
    auto order = permutation(0, m_, seed_, "epoch1_prefix", 0);
    const auto rest = permutation(m_, n_, seed_, "epoch1_rest", 0);
    order.insert(order.end(), rest.begin(), rest.end());
    return order;
  }
  return permutation(0, n_, seed_, "full_epoch", epoch);
}

std::vector<std::size_t> DataOrder::prefix_epoch(std::size_t epoch) const {
  if (epoch == 0) throw std::invalid_argument("epochs are 1-based");
  if (epoch == 1) return permutation(0, m_, seed_, "epoch1_prefix", 0);
  return permutation(0, m_, prefix_seed_, "prefix_epoch", epoch);
}

std::size_t RunSpec::prefix_size(std::size_t n) const {
  return static_cast<std::size_t>(toy::prefix_size(alpha, static_cast<int>(n)));
}

void RunSpec::validate(std::size_t n) const {
  if (!(alpha >= 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("alpha must lie in [0,1)");
  }
  if (batch == 0) throw std::invalid_argument("batch must be positive");
  if (n % batch != 0) {
    throw std::invalid_argument("batch must divide n (truncate the dataset)");
  }
  if (prefix_size(n) % batch != 0) {
    throw std::invalid_argument("batch must divide floor(alpha n)");
  }
  if (epsilon && !(*epsilon >= 0.0 && *epsilon < 1.0)) {
    throw std::invalid_argument("epsilon must lie in [0,1)");
  }
  if (max_steps == 0) throw std::invalid_argument("max_steps must be positive");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw std::invalid_argument("momentum must lie in [0,1)");
  }
}

SgdState SgdState::start(std::vector<float> w0) {
  SgdState s;
  s.velocity.assign(w0.size(), 0.0f);
  s.weights = std::move(w0);
  return s;
}

void sgd_step(SgdState& state, std::span<const float> grad,
              double learning_rate, double momentum) {
  if (grad.size() != state.weights.size()) {
    throw std::invalid_argument("gradient length mismatch");
  }
  if (state.velocity.size() != state.weights.size()) {
    state.velocity.assign(state.weights.size(), 0.0f);
  }
  const auto lr = static_cast<float>(learning_rate);
  const auto mu = static_cast<float>(momentum);
  for (std::size_t i = 0; i < grad.size(); ++i) {
    state.velocity[i] = mu * state.velocity[i] + grad[i];
    state.weights[i] -= lr * state.velocity[i];
  }
  ++state.steps;
}

const std::vector<float>& RunTrace::at(const std::string& name) const {
  const auto it = checkpoints.find(name);
  if (it == checkpoints.end()) {
    throw std::out_of_range("no checkpoint named " + name);
  }
  return it->second;
}

std::string prefix_checkpoint_name(std::size_t t) {
  return "prefix_T" + std::to_string(t);
}

std::string ghost_checkpoint_name(std::size_t t) {
  return "ghost_T" + std::to_string(t);
}

RunTrace sgd_continue(const Architecture& arch, SgdState state,
                      const Dataset& data, const DataOrder& order,
                      const RunSpec& spec, const RunControl& control) {
  spec.validate(data.size());
  arch.check_dataset(data);
  if (state.weights.size() != arch.parameter_count()) {
    throw std::invalid_argument("initial weights have wrong length");
  }
  if (order.n() != data.size()) {
    throw std::invalid_argument("data order does not match dataset size");
  }
  const std::size_t b = spec.batch;
  const std::size_t epoch_len =
      control.schedule == Schedule::kFullData ? order.n() : order.m();
  const std::size_t stop_at =
      std::min(control.stop_at_step == 0 ? spec.max_steps : control.stop_at_step,
               spec.max_steps);

  RunTrace trace;
  auto snapshot_due = [&](std::size_t step) {
    return std::find(control.snapshot_steps.begin(), control.snapshot_steps.end(),
                     step) != control.snapshot_steps.end();
  };
  auto take_snapshot = [&] {
    if (snapshot_due(state.steps)) {
      trace.checkpoints[control.snapshot_tag + std::to_string(state.steps)] =
          state.weights;
    }
  };
  for (std::size_t t : control.snapshot_steps) {
    if (t < state.steps) {
      throw std::invalid_argument("snapshot step precedes the starting state");
    }
  }

  take_snapshot();
  if (epoch_len == 0) {
    // Nothing to train on; every later snapshot is the starting point.
    for (std::size_t t : control.snapshot_steps) {
      trace.checkpoints[control.snapshot_tag + std::to_string(t)] = state.weights;
    }
    trace.step_count = state.steps;
    trace.final_state = std::move(state);
    return trace;
  }

  std::vector<float> grad(arch.parameter_count());
  Workspace<float> ws;
  std::size_t cached_epoch = 0;
  std::vector<std::size_t> epoch_order;
  bool converged = false;

  while (state.steps < stop_at && !converged) {
    const std::size_t pos = state.steps * b;
    const std::size_t epoch = pos / epoch_len + 1;
    const std::size_t offset = pos % epoch_len;
    if (epoch != cached_epoch) {
      epoch_order = control.schedule == Schedule::kFullData
                        ? order.full_epoch(epoch)
                        : order.prefix_epoch(epoch);
      cached_epoch = epoch;
    }
    const std::span<const std::size_t> batch(epoch_order.data() + offset, b);
    forward_backward<float>(arch, state.weights, data, batch, grad, ws);
    sgd_step(state, grad, spec.learning_rate, spec.momentum);
    take_snapshot();

    if ((state.steps * b) % epoch_len == 0) {
      if (!all_finite(state.weights)) {
        throw NumericError("SGD diverged: non-finite weights at step " +
                           std::to_string(state.steps));
      }
      if (control.stop_on_epsilon && spec.epsilon) {
        const std::size_t active_end =
            control.schedule == Schedule::kFullData ? order.n() : order.m();
        const double err =
            zero_one_error<float>(arch, state.weights, data, 0, active_end);
        trace.final_train_error = err;
        converged = err <= *spec.epsilon;
      }
    }
  }
  if (!all_finite(state.weights)) {
    throw NumericError("SGD diverged: non-finite weights");
  }
  if (!converged) {
    const std::size_t active_end =
        control.schedule == Schedule::kFullData ? order.n() : order.m();
    trace.final_train_error =
        zero_one_error<float>(arch, state.weights, data, 0, active_end);
  }
  trace.step_count = state.steps;
  trace.final_state = std::move(state);
  return trace;
}

SgdState coupling_run(const Architecture& arch, std::vector<float> w_init,
                      const Dataset& data, const DataOrder& order,
                      const RunSpec& spec) {
  spec.validate(data.size());
  const std::size_t m = spec.prefix_size(data.size());
  if (order.m() != m) throw std::invalid_argument("data order prefix mismatch");
  SgdState state = SgdState::start(std::move(w_init));
  if (m == 0) return state;
  RunControl control;
  control.schedule = Schedule::kPrefixOnly;
  control.stop_at_step = m / spec.batch;
  RunSpec capped = spec;
  capped.max_steps = std::max(spec.max_steps, m / spec.batch);
  return sgd_continue(arch, std::move(state), data, order, capped, control)
      .final_state;
}

RunTrace base_run(const Architecture& arch, const SgdState& coupled,
                  const Dataset& data, const DataOrder& order,
                  const RunSpec& spec) {
  RunControl control;
  control.schedule = Schedule::kFullData;
  control.stop_on_epsilon = true;
  RunTrace trace = sgd_continue(arch, coupled, data, order, spec, control);
  trace.checkpoints["coupling_end"] = coupled.weights;
  trace.checkpoints["base_end"] = trace.final_state.weights;
  return trace;
}

RunTrace prefix_run(const Architecture& arch, const SgdState& coupled,
                    const Dataset& data, const DataOrder& order,
                    const RunSpec& spec, const std::vector<std::size_t>& t_grid) {
  if (t_grid.empty()) throw std::invalid_argument("t_grid must be nonempty");
  if (!std::is_sorted(t_grid.begin(), t_grid.end())) {
    throw std::invalid_argument("t_grid must be sorted");
  }
  RunControl control;
  control.schedule = Schedule::kPrefixOnly;
  control.stop_at_step = t_grid.back();
  control.snapshot_steps = t_grid;
  control.snapshot_tag = "prefix_T";
  RunSpec capped = spec;
  capped.max_steps = std::max(spec.max_steps, t_grid.back());
  if (t_grid.back() == coupled.steps) {
    RunTrace trace;
    for (std::size_t t : t_grid) {
      if (t != coupled.steps) {
        throw std::invalid_argument("snapshot step precedes the starting state");
      }
    }
    trace.checkpoints[prefix_checkpoint_name(t_grid.back())] = coupled.weights;
    trace.step_count = coupled.steps;
    trace.final_state = coupled;
    return trace;
  }
  return sgd_continue(arch, coupled, data, order, capped, control);
}

RunTrace ghost_run(const Architecture& arch, const SgdState& coupled,
                   const Dataset& data, const Dataset& ghost_pool,
                   const DataOrder& order, const RunSpec& spec,
                   const std::vector<std::size_t>& t_grid) {
  if (t_grid.empty()) throw std::invalid_argument("t_grid must be nonempty");
  if (!std::is_sorted(t_grid.begin(), t_grid.end())) {
    throw std::invalid_argument("t_grid must be sorted");
  }
  const std::size_t m = spec.prefix_size(data.size());
  const Dataset spliced = data.splice_prefix(m, ghost_pool);
  RunControl control;
  control.schedule = Schedule::kFullData;
  control.stop_at_step = t_grid.back();
  control.snapshot_steps = t_grid;
  control.snapshot_tag = "ghost_T";
  RunSpec capped = spec;
  capped.max_steps = std::max(spec.max_steps, t_grid.back());
  if (t_grid.back() == coupled.steps) {
    RunTrace trace;
    trace.checkpoints[ghost_checkpoint_name(t_grid.back())] = coupled.weights;
    trace.step_count = coupled.steps;
    trace.final_state = coupled;
    return trace;
  }
  return sgd_continue(arch, coupled, spliced, order, capped, control);
}

RunTrace sgd_run(const Architecture& arch, std::vector<float> w0,
                 const Dataset& data, const DataOrder& order,
                 const RunSpec& spec) {
  const SgdState coupled = coupling_run(arch, std::move(w0), data, order, spec);
  return base_run(arch, coupled, data, order, spec);
}

}  // namespace ddpb
