#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ddpb/dataset.hpp"

namespace ddpb {

/// Where the train / test / ghost data come from.
///
/// kind "synthetic": train, test, and ghost sets are drawn from the same
/// generator with independent seeds derived from `seed`.
/// kind "idx": train is the first `n` rows of the IDX training files, the
/// ghost pool is the following `n_ghost` rows, test is the first `n_test`
/// rows of the IDX test files.
struct DatasetRef {
  std::string kind = "synthetic";
  std::string generator = "gaussian_pair";
  std::size_t n = 2000;
  std::size_t n_test = 10000;
  std::size_t n_ghost = 2000;
  std::size_t dim = 20;
  double separation = 4.0;
  std::uint64_t seed = 1;
  std::string train_images;
  std::string train_labels;
  std::string test_images;
  std::string test_labels;
};

struct ExperimentConfig {
  DatasetRef dataset;
  std::vector<int> layer_sizes = {20, 32, 2};
  std::vector<double> alphas = {0.0, 0.2, 0.4, 0.6, 0.8};
  std::vector<double> sigma_p_grid = {3e-8, 1e-7, 3e-7, 1e-6, 3e-6, 1e-5,
                                      3e-5, 1e-4, 3e-4, 1e-3, 3e-3, 1e-2};
  /// Prefix stopping times, as multiples of m/b steps.
  std::vector<std::size_t> prefix_t_multipliers = {1, 2, 4, 8};
  /// Ghost-run stopping times, in epochs of n/b steps.
  std::vector<std::size_t> ghost_t_epochs = {1, 2, 4, 8, 16};
  std::vector<double> epsilons = {0.05};
  std::size_t batch = 50;
  double learning_rate = 0.01;
  double momentum = 0.95;
  std::size_t max_epochs = 200;
  double bound_opt_learning_rate = 1e-3;
  std::size_t bound_opt_steps = 2000;
  std::size_t bound_opt_log_every = 50;
  std::vector<double> bound_opt_sigma_p_grid = {1e-4, 1e-3, 1e-2};
  double oracle_variance_learning_rate = 1e-3;
  std::size_t oracle_variance_steps = 500;
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
  double delta = 0.05;
  /// Monte-Carlo confidence budget, as a fraction of delta, spent on top of
  /// delta (split evenly over the prior-variance grid).
  double delta_mc_fraction = 0.5;
  std::size_t mc_samples = 2000;
  std::size_t test_mc_samples = 200;
  std::size_t scatter_params = 0;

  /// Throws ConfigError on any invalid field.
  void validate() const;

  /// Grids sorted and deduplicated as they enter the union bound.
  std::vector<std::size_t> prefix_t_grid(std::size_t m) const;
  std::vector<std::size_t> ghost_t_grid(std::size_t n) const;
};

nlohmann::json to_json(const ExperimentConfig& cfg);

/// Strict parse: unknown keys raise ConfigError.
ExperimentConfig config_from_json(const nlohmann::json& j);

/// Applies "key=value" overrides; dotted keys address nested fields and the
/// value is parsed as JSON when possible, else taken as a string.
nlohmann::json apply_overrides(nlohmann::json j,
                               const std::vector<std::string>& overrides);

ExperimentConfig load_config(const std::optional<std::filesystem::path>& path,
                             const std::vector<std::string>& overrides);

/// FNV-1a of the canonical JSON echo.
std::string config_hash(const ExperimentConfig& cfg);

struct DataBundle {
  Dataset train;
  Dataset test;
  std::optional<Dataset> ghost;
};

/// Materializes the datasets, truncating train to a multiple of `batch`.
DataBundle load_data(const DatasetRef& ref, std::size_t batch);

}  // namespace ddpb
