#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ddpb/rng.hpp"

namespace ddpb {

/// Diagonal Gaussian over a flat weight vector. `variance` holds variances,
/// never standard deviations.
///
/// Zero variances are representable so that point-mass posteriors can be
/// sampled; every KL routine rejects variances below kMinVariance.
struct GaussianSpec {
  std::vector<double> mean;
  std::vector<double> variance;

  GaussianSpec() = default;
  GaussianSpec(std::vector<double> mean_, std::vector<double> variance_);

  static GaussianSpec isotropic(std::vector<double> mean, double variance);

  std::size_t dim() const { return mean.size(); }

  /// Writes one draw into `out` (size dim()).
  void sample(Rng& rng, std::span<double> out) const;
};

inline constexpr double kMinVariance = 1e-24;

struct KlComponents {
  double mean_part = 0.0;
  double variance_part = 0.0;
  double total() const { return mean_part + variance_part; }
};

/// KL(q || p) for diagonal Gaussians, split into the mean and variance terms.
KlComponents kl_diag_components(const GaussianSpec& q, const GaussianSpec& p);

double kl_diag(const GaussianSpec& q, const GaussianSpec& p);

/// KL(N(mu_q, var_q I) || N(mu_p, var_p I)) from the squared mean distance
/// alone. Lets a prior-variance grid be swept without touching the weights.
double kl_isotropic(double sq_distance, std::size_t dim, double var_q,
                    double var_p);

/// KL against a diagonal prior whose variance is chosen per coordinate to
/// minimize the divergence: 0.5 * sum log(1 + d_i^2 / var_i).
/// This is not a valid PAC-Bayes prior; it is used for the hypothetical
/// optimal-variance study.
double oracle_variance_kl(const GaussianSpec& posterior,
                          std::span<const double> prior_mean);

/// Isotropic prior variance (tr(cond cov) + tr(Sigma)) / p.
double appc_prior_variance(double trace_cond_cov, double trace_sigma,
                           std::size_t p_dim);

/// ||w_s - w_alpha||^2 / ((1 - alpha) n).
double scaled_l2(std::span<const double> w_s, std::span<const double> w_alpha,
                 double alpha, std::size_t n);

double squared_distance(std::span<const double> a, std::span<const double> b);

}  // namespace ddpb
