#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ddpb/bounds.hpp"
#include "ddpb/config.hpp"
#include "ddpb/dataset.hpp"
#include "ddpb/mlp.hpp"
#include "ddpb/sgd.hpp"

namespace ddpb {

/// One (alpha, epsilon, seed) experiment cell.
struct CellSpec {
  double alpha = 0.0;
  double epsilon = 0.05;
  std::uint64_t seed = 0;
};

/// How the confidence budget is spread over the declared grids.
struct DeltaAccounting {
  double delta = 0.05;
  std::size_t sigma_grid = 1;
  std::size_t t_grid = 1;
  std::size_t grid_size = 1;   ///< sigma_grid * t_grid
  double delta_bound = 0.05;   ///< delta / grid_size, enters the certificate
  double delta_mc_total = 0.0; ///< spent on Monte-Carlo risk estimates
  double delta_mc_each = 0.0;  ///< per prior variance
};

DeltaAccounting delta_accounting(const ExperimentConfig& cfg,
                                 std::size_t sigma_grid, std::size_t t_grid);

struct Candidate {
  double sigma_p = 0.0;
  std::size_t t = 0;
  double kl = 0.0;
  bool evaluated = false;  ///< false when pruned by the zero-risk lower bound
  GibbsRiskEstimate risk;
  BoundReport report;
};

struct BoundExperimentResult {
  CellSpec cell;
  std::string prior_source;  ///< "prefix" or "ghost"
  std::size_t m = 0;
  std::size_t n = 0;
  std::size_t n_eval = 0;
  double sigma_p_selected = 0.0;
  std::size_t t_selected = 0;
  double kl = 0.0;
  GibbsRiskEstimate gibbs_risk;
  BoundReport bound_report;
  double test_error = 0.0;  ///< Gibbs error of Q on the test set (MC)
  double train_error = 0.0; ///< 0-1 error of w_S on S
  std::size_t base_steps = 0;
  double d_alpha = 0.0;
  DeltaAccounting accounting;
  std::vector<Candidate> candidates;
  std::vector<double> posterior_mean;  ///< w_S
  std::vector<double> prior_mean;      ///< w_alpha at t_selected
};

struct SeedAggregate {
  double mean = 0.0;
  double std = 0.0;
  std::size_t count = 0;
};

/// Order-independent mean and sample standard deviation.
SeedAggregate aggregate(std::span<const double> values);

/// Gibbs 0-1 error of N(mean, var I) on rows [begin, end), averaged over
/// `samples` draws.
double gibbs_error(const Architecture& arch, std::span<const double> mean,
                   double variance, const Dataset& data, std::size_t begin,
                   std::size_t end, std::size_t samples, Rng& rng);

/// Weights of the prefix-only training snapshots for one cell, read from S_alpha
/// alone. Keyed by total step count.
std::vector<std::vector<float>> prefix_prior_means(
    const Architecture& arch, const Dataset& train, const ExperimentConfig& cfg,
    const CellSpec& cell, const std::vector<std::size_t>& t_grid);

/// Coupling, base run to epsilon, prefix (or ghost, when `ghost` is given)
/// snapshots, then the best certificate over the sigma_P x T grid.
BoundExperimentResult get_bound(const Dataset& train, const Dataset* ghost,
                                const Dataset& test, const ExperimentConfig& cfg,
                                const CellSpec& cell);

struct OptTracePoint {
  std::size_t step = 0;
  double surrogate = 0.0;  ///< mean surrogate over the logging window
};

struct BoundOptResult {
  BoundExperimentResult result;
  double posterior_variance = 0.0;
  std::vector<OptTracePoint> trace;
};

/// Differentiable surrogate: moment branch of the variational bound.
struct Surrogate {
  double value = 0.0;
  double d_loss = 0.0;  ///< d value / d empirical loss
  double d_b = 0.0;     ///< d value / d B
};
Surrogate moment_surrogate(double loss, double b_term);

/// One reparameterized draw of the surrogate bound and its gradients.
struct SurrogateEval {
  double value = 0.0;
  double loss = 0.0;
  double kl = 0.0;
  std::vector<double> grad_mean;
  std::vector<double> grad_log_var;  ///< one entry (isotropic) or one per weight
};

/// Posterior N(mean, exp(log_var) I) against prior N(prior_mean, sigma_p I),
/// evaluated at mean + exp(log_var / 2) eps. `log_term` is ln(2 sqrt(n)/delta).
SurrogateEval isotropic_surrogate(const Architecture& arch, const Dataset& data,
                                  std::span<const std::size_t> batch,
                                  std::span<const double> mean, double log_var,
                                  std::span<const double> prior_mean,
                                  double sigma_p, std::span<const double> eps,
                                  std::size_t n_eval, double log_term,
                                  Workspace<double>& ws);

/// Posterior N(mean, diag exp(log_var)) scored with the oracle-variance KL
/// against `prior_mean`; gradients are with respect to log_var only.
SurrogateEval oracle_surrogate(const Architecture& arch, const Dataset& data,
                               std::span<const std::size_t> batch,
                               std::span<const double> mean,
                               std::span<const double> log_var,
                               std::span<const double> prior_mean,
                               std::span<const double> eps, std::size_t n_eval,
                               double log_term, Workspace<double>& ws);

/// Minimizes the surrogate bound over an isotropic Gaussian posterior that
/// starts at the prefix-trained prior, then certifies it.
BoundOptResult bound_opt(const Dataset& train, const Dataset& test,
                         const ExperimentConfig& cfg, const CellSpec& cell,
                         std::size_t steps);

struct OracleVarianceRow {
  double alpha = 0.0;
  std::uint64_t seed = 0;
  double sigma_p = 0.0;
  double isotropic_kl = 0.0;
  double oracle_kl = 0.0;
  double isotropic_bound = 0.0;
  double oracle_bound = 0.0;  ///< hypothetical; not a valid certificate
};

OracleVarianceRow oracle_variance_study(const Dataset& train, const Dataset& test,
                                        const ExperimentConfig& cfg,
                                        const CellSpec& cell);

struct L2Row {
  double alpha = 0.0;
  std::uint64_t seed = 0;
  double d_prefix = 0.0;
  double d_ghost = 0.0;
  std::size_t t_prefix = 0;
  std::size_t t_ghost = 0;
  /// First `scatter_params` coordinates of w_S and the closest prefix weights.
  std::vector<double> scatter_base;
  std::vector<double> scatter_prefix;
};

L2Row l2_sweep(const Dataset& train, const Dataset& ghost,
               const ExperimentConfig& cfg, const CellSpec& cell);

}  // namespace ddpb
