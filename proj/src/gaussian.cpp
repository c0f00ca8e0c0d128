#include "ddpb/gaussian.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <utility>

namespace ddpb {

namespace {

void check_same_dim(std::size_t a, std::size_t b) {
  if (a != b) throw std::invalid_argument("dimension mismatch");
}

void check_kl_variances(const GaussianSpec& g) {
  for (double v : g.variance) {
    if (!(v >= kMinVariance)) {
      throw std::invalid_argument("degenerate variance entry (< 1e-24)");
    }
  }
}

}  // namespace

GaussianSpec::GaussianSpec(std::vector<double> mean_,
                           std::vector<double> variance_)
    : mean(std::move(mean_)), variance(std::move(variance_)) {
  check_same_dim(mean.size(), variance.size());
  for (double v : variance) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument("variance entries must be finite and >= 0");
    }
  }
}

GaussianSpec GaussianSpec::isotropic(std::vector<double> mean,
                                     double variance) {
  std::vector<double> var(mean.size(), variance);
  return GaussianSpec(std::move(mean), std::move(var));
}

void GaussianSpec::sample(Rng& rng, std::span<double> out) const {
  check_same_dim(out.size(), mean.size());
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = 0; i < mean.size(); ++i) {
    const double z = normal(rng);
    out[i] = mean[i] + std::sqrt(variance[i]) * z;
  }
}

KlComponents kl_diag_components(const GaussianSpec& q, const GaussianSpec& p) {
  check_same_dim(q.dim(), p.dim());
  check_kl_variances(q);
  check_kl_variances(p);
  KlComponents kl;
  for (std::size_t i = 0; i < q.dim(); ++i) {
    const double d = q.mean[i] - p.mean[i];
    const double ratio = q.variance[i] / p.variance[i];
    kl.mean_part += d * d / p.variance[i];
    kl.variance_part += ratio - 1.0 - std::log(ratio);
  }
  kl.mean_part *= 0.5;
  kl.variance_part *= 0.5;
  return kl;
}

double kl_diag(const GaussianSpec& q, const GaussianSpec& p) {
  return kl_diag_components(q, p).total();
}

double kl_isotropic(double sq_distance, std::size_t dim, double var_q,
                    double var_p) {
  if (!(var_q >= kMinVariance) || !(var_p >= kMinVariance)) {
    throw std::invalid_argument("degenerate variance entry (< 1e-24)");
  }
  if (sq_distance < 0.0) throw std::invalid_argument("negative distance");
  const double p = static_cast<double>(dim);
  const double ratio = var_q / var_p;
  return 0.5 * (sq_distance / var_p + p * (ratio - 1.0 - std::log(ratio)));
}

double oracle_variance_kl(const GaussianSpec& posterior,
                          std::span<const double> prior_mean) {
  check_same_dim(posterior.dim(), prior_mean.size());
  check_kl_variances(posterior);
  double total = 0.0;
  for (std::size_t i = 0; i < posterior.dim(); ++i) {
    const double d = posterior.mean[i] - prior_mean[i];
    total += std::log1p(d * d / posterior.variance[i]);
  }
  return 0.5 * total;
}

double appc_prior_variance(double trace_cond_cov, double trace_sigma,
                           std::size_t p_dim) {
  if (p_dim == 0) throw std::invalid_argument("p_dim must be positive");
  if (trace_cond_cov < 0.0 || trace_sigma < 0.0) {
    throw std::invalid_argument("traces must be nonnegative");
  }
  if (trace_cond_cov == 0.0 && trace_sigma == 0.0) {
    throw std::invalid_argument("degenerate posterior: both traces are zero");
  }
  return (trace_cond_cov + trace_sigma) / static_cast<double>(p_dim);
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  check_same_dim(a.size(), b.size());
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    total += d * d;
  }
  return total;
}

double scaled_l2(std::span<const double> w_s, std::span<const double> w_alpha,
                 double alpha, std::size_t n) {
  if (!(alpha >= 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("alpha must lie in [0,1)");
  }
  const double denom = (1.0 - alpha) * static_cast<double>(n);
  if (denom < 1.0) throw std::invalid_argument("(1 - alpha) n must be >= 1");
  return squared_distance(w_s, w_alpha) / denom;
}

}  // namespace ddpb
