#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "ddpb/rng.hpp"

namespace ddpb::toy {

/// How a configured scale constant is to be read.
enum class Scale { kStdDev, kVariance };

struct ScaleParam {
  double value = 0.0;
  Scale scale = Scale::kVariance;

  double as_variance() const {
    return scale == Scale::kStdDev ? value * value : value;
  }
};

/// Constants of the one-pass linear-classification toy problem.
///
/// Inputs are x_i = (y_i u, x_{i,2}) with x_{i,2} ~ N(0, sigma^2/D I_D);
/// the learner runs w_t = w_{t-1} + y_t x_t / t and adds N(0, kappa I_D)
/// noise to the D noise coordinates. `tau` = (sum_i 1/i) ||u||^2.
struct ToyConfig {
  int n = 100;
  int k_dim = 1;
  int d_dim = 1000;
  ScaleParam sigma;
  ScaleParam kappa;
  double tau = 64.0;
  double delta = 0.05;

  void validate() const;

  double sigma_sq() const { return sigma.as_variance(); }
  double kappa_var() const { return kappa.as_variance(); }

  /// sigma = 8 (std), kappa = 4 (variance), tau = 64, delta = 0.05.
  static ToyConfig paper_literal();
  /// sigma = 8 (std), kappa = 1 (variance); reproduces 2C(empty) ~ 1.06 and
  /// the argmin near J = [24].
  static ToyConfig calibrated();
  static std::optional<ToyConfig> preset(const std::string& name);
};

/// Sorted 1-based indices J, a subset of [n].
class PrefixSet {
 public:
  PrefixSet() = default;
  explicit PrefixSet(std::vector<int> indices);

  static PrefixSet initial_segment(int m);

  const std::vector<int>& indices() const { return indices_; }
  std::size_t size() const { return indices_.size(); }
  bool contains(int i) const;
  void check_within(int n) const;

 private:
  std::vector<int> indices_;
};

struct EtaSums {
  double eta1_j = 0.0;
  double eta2_j = 0.0;
  double eta1_comp = 0.0;
  double eta2_comp = 0.0;
};

EtaSums eta_sums(const PrefixSet& j, const ToyConfig& cfg);

/// eta2 * sigma^2 / D + kappa.
double phi(double eta2, const ToyConfig& cfg);

/// (D/2) ln(phi_{complement of J} / kappa).
double cond_mutual_info(const PrefixSet& j, const ToyConfig& cfg);

/// exp(-D/16) + exp(-tau^2 / (4 phi_[n] sigma^2)).
double risk_upper(const ToyConfig& cfg);

struct ObjectiveBounds {
  double c_of_j = 0.0;
  double r_bar = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

/// Lower (2C) and upper (optimal-beta with R-bar) bounds on the expected
/// linear bound with the data-dependent oracle prior.
ObjectiveBounds phi_objective_bounds(const PrefixSet& j, const ToyConfig& cfg);

struct SweepRow {
  double alpha = 0.0;
  int m = 0;
  ObjectiveBounds bounds;
};

struct Sweep {
  std::vector<SweepRow> rows;
  std::size_t argmin_upper = 0;
};

/// floor(n alpha), robust to representation error in alpha.
int prefix_size(double alpha, int n);

Sweep sweep_alpha(const ToyConfig& cfg, const std::vector<double>& alphas);

/// Alphas {0, step, 2 step, ...} strictly below 1.
std::vector<double> alpha_grid(double step);

struct SimOptions {
  std::size_t trials = 100000;       ///< KL draws
  std::size_t risk_trials = 2000;    ///< full learner simulations
};

struct SimResult {
  double mean_kl = 0.0;
  double kl_stderr = 0.0;
  double mean_kl_full = 0.0;  ///< KL from the full learner simulations
  double kl_full_stderr = 0.0;
  double mean_emp_risk_comp = 0.0;
  double risk_comp_stderr = 0.0;
  double mean_emp_risk_full = 0.0;
  double risk_full_stderr = 0.0;
  std::size_t trials = 0;
  std::size_t risk_trials = 0;
};

/// Per-sample KL(Q(S) || P_J(S_J)) given the noise-coordinate sums
/// s_j = sum_{i not in J} eta_i y_i x_{i,2,j}.
double per_sample_kl(double sum_sq, double phi_comp, const ToyConfig& cfg);

SimResult mc_simulate(const ToyConfig& cfg, const PrefixSet& j,
                      const SimOptions& opts, Rng& rng);

/// Outcome of one full learner simulation.
struct LearnerDraw {
  double kl = 0.0;
  double risk_comp = 0.0;  ///< 0-1 risk on S \ S_J (0 when J = [n])
  double risk_full = 0.0;  ///< 0-1 risk on S
  double signal_weight = 0.0;  ///< first signal coordinate of w_n
};

/// Runs the one-pass learner once on freshly drawn data.
LearnerDraw simulate_learner(const ToyConfig& cfg, const PrefixSet& j,
                             Rng& rng);

/// MI/n - cMI(J)/(n - |J|), MI being the unconditional value (J empty).
double information_rate_gain(const PrefixSet& j, const ToyConfig& cfg);

struct ExcessBias {
  double value = 0.0;   ///< E[R_{S \ S_J} - R_S]
  double std_error = 0.0;
  double risk_comp = 0.0;
  double risk_full = 0.0;
};

/// Monte-Carlo estimate of the excess bias. When `random_subset` is set a
/// fresh uniformly random J of the same size is drawn on every trial.
ExcessBias excess_bias_mc(const PrefixSet& j, const ToyConfig& cfg,
                          std::size_t trials, Rng& rng,
                          bool random_subset = false);

/// Expected linear bound at fixed beta for a given expected risk R(J).
double expected_linear_bound(const PrefixSet& j, const ToyConfig& cfg,
                             double beta, double expected_risk);

/// Rate gain - 2(1 - beta) excess bias - ln(1/delta)/n * m/(n - m).
/// Nonnegative exactly when the data-dependent prior wins in expectation.
double prop1_margin(const PrefixSet& j, const ToyConfig& cfg, double beta,
                    double excess_bias);

}  // namespace ddpb::toy
