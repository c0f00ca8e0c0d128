#include "ddpb/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace ddpb {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

void check_delta(double delta) {
  require(delta > 0.0 && delta < 1.0, "delta must lie in (0,1)");
}

}  // namespace

void BoundInputs::validate() const {
  require(emp_risk >= 0.0 && emp_risk <= 1.0, "emp_risk must lie in [0,1]");
  require(kl >= 0.0, "kl must be nonnegative");
  require(n_eval >= 1, "n_eval must be positive");
  check_delta(delta);
}

double binary_kl(double q, double p) {
  require(!std::isnan(q) && !std::isnan(p), "binary_kl: NaN input");
  require(q >= 0.0 && q <= 1.0 && p >= 0.0 && p <= 1.0,
          "binary_kl: arguments must lie in [0,1]");
  if (q == p) return 0.0;
  if (p == 0.0 || p == 1.0) {
    throw std::domain_error("binary_kl: infinite divergence (p on boundary)");
  }
  double value = 0.0;
  if (q > 0.0) value += q * std::log(q / p);
  if (q < 1.0) value += (1.0 - q) * std::log((1.0 - q) / (1.0 - p));
  return std::max(value, 0.0);
}

double kl_inverse(double q, double bound) {
  require(!std::isnan(q) && !std::isnan(bound), "kl_inverse: NaN input");
  require(q >= 0.0 && q <= 1.0, "kl_inverse: q must lie in [0,1]");
  require(bound >= 0.0, "kl_inverse: bound must be nonnegative");
  if (bound == 0.0) return q;
  if (q == 1.0) return 1.0;

  double lo = q;
  double hi = 1.0;
  // Shrink until the bracket can no longer be split in double precision.
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (binary_kl(q, mid) <= bound) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return hi;
}

double linear_bound(double emp_risk, double kl, std::size_t n_eval,
                    double beta, double delta) {
  BoundInputs{emp_risk, kl, n_eval, delta}.validate();
  require(beta > 0.0 && beta < 1.0, "beta must lie in (0,1)");
  return emp_risk / beta + (kl + std::log(1.0 / delta)) /
                               (2.0 * beta * (1.0 - beta) *
                                static_cast<double>(n_eval));
}

double optimal_beta_bound(double r, double c) {
  require(r >= 0.0 && c >= 0.0, "optimal_beta_bound: r and c must be >= 0");
  return r + c + std::sqrt(2.0 * r * c + c * c);
}

double maurer_b_term(double kl, std::size_t n_eval, double delta) {
  require(kl >= 0.0, "kl must be nonnegative");
  require(n_eval >= 1, "n_eval must be positive");
  check_delta(delta);
  const double n = static_cast<double>(n_eval);
  return (kl + std::log(2.0 * std::sqrt(n) / delta)) / n;
}

BoundReport variational_kl_bound(double emp_risk, double b_term) {
  require(emp_risk >= 0.0 && emp_risk <= 1.0, "emp_risk must lie in [0,1]");
  require(b_term >= 0.0, "b_term must be nonnegative");
  BoundReport report;
  report.inputs.emp_risk = emp_risk;
  report.b_term = b_term;
  report.moment_value =
      emp_risk + b_term + std::sqrt(b_term * (b_term + 2.0 * emp_risk));
  report.pinsker_value = emp_risk + std::sqrt(b_term / 2.0);
  report.raw_bound = std::min(report.moment_value, report.pinsker_value);
  report.final_bound = std::clamp(report.raw_bound, 0.0, 1.0);
  return report;
}

BoundReport evaluate_bound(const BoundInputs& inputs) {
  inputs.validate();
  BoundReport report = variational_kl_bound(
      inputs.emp_risk, maurer_b_term(inputs.kl, inputs.n_eval, inputs.delta));
  report.inputs = inputs;
  return report;
}

double union_adjusted_delta(double delta, std::size_t grid_size) {
  check_delta(delta);
  require(grid_size >= 1, "grid_size must be positive");
  return delta / static_cast<double>(grid_size);
}

GibbsRiskEstimate mc_gibbs_risk(const GaussianSpec& posterior,
                                const RiskFn& risk, std::size_t dataset_size,
                                std::size_t k_samples, double delta_mc,
                                Rng& rng) {
  if (dataset_size == 0) {
    throw std::invalid_argument("mc_gibbs_risk: empty dataset");
  }
  require(k_samples >= 1, "mc_gibbs_risk: k_samples must be positive");
  check_delta(delta_mc);

  std::vector<double> w(posterior.dim());
  double total = 0.0;
  for (std::size_t s = 0; s < k_samples; ++s) {
    posterior.sample(rng, w);
    const double r = risk(w);
    if (!(r >= 0.0 && r <= 1.0)) {
      throw std::domain_error("mc_gibbs_risk: loss outside [0,1]");
    }
    total += r;
  }
  GibbsRiskEstimate est;
  est.samples = k_samples;
  est.mean = std::clamp(total / static_cast<double>(k_samples), 0.0, 1.0);
  est.upper = kl_inverse(est.mean, std::log(2.0 / delta_mc) /
                                       static_cast<double>(k_samples));
  return est;
}

}  // namespace ddpb
