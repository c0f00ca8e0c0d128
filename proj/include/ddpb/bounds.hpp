#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>

#include "ddpb/gaussian.hpp"
#include "ddpb/rng.hpp"

namespace ddpb {

/// Quantities entering one risk-bound evaluation. KL in nats.
struct BoundInputs {
  double emp_risk = 0.0;
  double kl = 0.0;
  std::size_t n_eval = 1;
  double delta = 0.05;

  void validate() const;
};

/// Result of evaluating the variational (moment / Pinsker) bound.
struct BoundReport {
  BoundInputs inputs;
  std::optional<double> beta;
  double b_term = 0.0;
  double moment_value = 0.0;
  double pinsker_value = 0.0;
  double raw_bound = 0.0;    ///< min of the two branches, unclamped
  double final_bound = 0.0;  ///< raw_bound clamped to [0, 1]
  double delta_mc = 0.0;     ///< confidence spent on Monte-Carlo risk, 0 if none
};

/// kl(q || p) between Bernoulli(q) and Bernoulli(p), with 0 log 0 = 0.
/// Throws std::domain_error when the divergence is infinite (p in {0,1}, q != p).
double binary_kl(double q, double p);

/// Largest p in [q, 1) with binary_kl(q, p) <= bound, by bisection.
double kl_inverse(double q, double bound);

/// (1/beta) R + (KL + ln(1/delta)) / (2 beta (1 - beta) n). Not clamped.
double linear_bound(double emp_risk, double kl, std::size_t n_eval,
                    double beta, double delta);

/// inf over beta of r/beta + c/(2 beta (1 - beta)), i.e. r + c + sqrt(2rc + c^2).
double optimal_beta_bound(double r, double c);

/// (KL + ln(2 sqrt(n) / delta)) / n.
double maurer_b_term(double kl, std::size_t n_eval, double delta);

/// Moment and Pinsker branches for a given empirical risk and B.
/// `inputs` of the returned report only carries emp_risk.
BoundReport variational_kl_bound(double emp_risk, double b_term);

/// Full certificate: Maurer's B followed by the variational bound.
BoundReport evaluate_bound(const BoundInputs& inputs);

double union_adjusted_delta(double delta, std::size_t grid_size);

/// Empirical 0-1 risk of a weight vector on the evaluation set.
using RiskFn = std::function<double(std::span<const double>)>;

struct GibbsRiskEstimate {
  double mean = 0.0;         ///< average sampled empirical risk
  double upper = 0.0;        ///< kl_inverse(mean, ln(2/delta_mc) / k)
  std::size_t samples = 0;
};

/// Monte-Carlo estimate of the Gibbs empirical risk of `posterior`, with a
/// certified upper bound holding with probability 1 - delta_mc over the draws.
GibbsRiskEstimate mc_gibbs_risk(const GaussianSpec& posterior,
                                const RiskFn& risk, std::size_t dataset_size,
                                std::size_t k_samples, double delta_mc,
                                Rng& rng);

}  // namespace ddpb
