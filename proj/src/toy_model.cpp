#include "ddpb/toy_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "ddpb/bounds.hpp"

namespace ddpb::toy {

namespace {

struct Welford {
  std::size_t count = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    ++count;
    const double d = x - mean;
    mean += d / static_cast<double>(count);
    m2 += d * (x - mean);
  }
  double stderr_of_mean() const {
    if (count < 2) return 0.0;
    const double var = m2 / static_cast<double>(count - 1);
    return std::sqrt(var / static_cast<double>(count));
  }
};

double psi(double r) { return r - 1.0 - std::log(r); }

}  // namespace

void ToyConfig::validate() const {
  if (n < 1 || k_dim < 1 || d_dim < 1) {
    throw std::invalid_argument("toy config: n, K, D must be positive");
  }
  if (!(sigma.value > 0.0) || !(kappa.value > 0.0) || !(tau > 0.0)) {
    throw std::invalid_argument("toy config: sigma, kappa, tau must be > 0");
  }
  if (!(delta > 0.0 && delta < 1.0)) {
    throw std::invalid_argument("toy config: delta must lie in (0,1)");
  }
}

ToyConfig ToyConfig::paper_literal() {
  ToyConfig cfg;
  cfg.sigma = {8.0, Scale::kStdDev};
  cfg.kappa = {4.0, Scale::kVariance};
  return cfg;
}

ToyConfig ToyConfig::calibrated() {
  ToyConfig cfg;
  cfg.sigma = {8.0, Scale::kStdDev};
  cfg.kappa = {1.0, Scale::kVariance};
  return cfg;
}

std::optional<ToyConfig> ToyConfig::preset(const std::string& name) {
  if (name == "paper-literal") return paper_literal();
  if (name == "calibrated") return calibrated();
  return std::nullopt;
}

PrefixSet::PrefixSet(std::vector<int> indices) : indices_(std::move(indices)) {
  std::sort(indices_.begin(), indices_.end());
  if (std::adjacent_find(indices_.begin(), indices_.end()) != indices_.end()) {
    throw std::invalid_argument("PrefixSet: duplicate index");
  }
  if (!indices_.empty() && indices_.front() < 1) {
    throw std::invalid_argument("PrefixSet: indices are 1-based");
  }
}

PrefixSet PrefixSet::initial_segment(int m) {
  if (m < 0) throw std::invalid_argument("PrefixSet: negative size");
  std::vector<int> idx(static_cast<std::size_t>(m));
  std::iota(idx.begin(), idx.end(), 1);
  return PrefixSet(std::move(idx));
}

bool PrefixSet::contains(int i) const {
  return std::binary_search(indices_.begin(), indices_.end(), i);
}

void PrefixSet::check_within(int n) const {
  if (!indices_.empty() && indices_.back() > n) {
    throw std::invalid_argument("PrefixSet: index exceeds n");
  }
}

EtaSums eta_sums(const PrefixSet& j, const ToyConfig& cfg) {
  cfg.validate();
  j.check_within(cfg.n);
  EtaSums s;
  // Summing from the smallest terms up keeps the tails accurate.
  for (int i = cfg.n; i >= 1; --i) {
    const double eta = 1.0 / static_cast<double>(i);
    if (j.contains(i)) {
      s.eta1_j += eta;
      s.eta2_j += eta * eta;
    } else {
      s.eta1_comp += eta;
      s.eta2_comp += eta * eta;
    }
  }
  return s;
}

double phi(double eta2, const ToyConfig& cfg) {
  return eta2 * cfg.sigma_sq() / static_cast<double>(cfg.d_dim) +
         cfg.kappa_var();
}

double cond_mutual_info(const PrefixSet& j, const ToyConfig& cfg) {
  const EtaSums s = eta_sums(j, cfg);
  const double ratio = phi(s.eta2_comp, cfg) / cfg.kappa_var();
  return 0.5 * static_cast<double>(cfg.d_dim) * std::log(ratio);
}

double risk_upper(const ToyConfig& cfg) {
  const EtaSums all = eta_sums(PrefixSet::initial_segment(cfg.n), cfg);
  const double phi_all = phi(all.eta2_j, cfg);
  const double d = static_cast<double>(cfg.d_dim);
  return std::exp(-d / 16.0) +
         std::exp(-cfg.tau * cfg.tau / (4.0 * phi_all * cfg.sigma_sq()));
}

ObjectiveBounds phi_objective_bounds(const PrefixSet& j, const ToyConfig& cfg) {
  j.check_within(cfg.n);
  const auto n_eval = static_cast<double>(cfg.n) - static_cast<double>(j.size());
  if (n_eval < 1.0) {
    throw std::invalid_argument("phi_objective_bounds: empty evaluation set");
  }
  ObjectiveBounds b;
  b.c_of_j = (cond_mutual_info(j, cfg) + std::log(1.0 / cfg.delta)) / n_eval;
  b.r_bar = risk_upper(cfg);
  b.lower = 2.0 * b.c_of_j;
  b.upper = optimal_beta_bound(b.r_bar, b.c_of_j);
  return b;
}

int prefix_size(double alpha, int n) {
  return static_cast<int>(std::floor(alpha * static_cast<double>(n) + 1e-9));
}

Sweep sweep_alpha(const ToyConfig& cfg, const std::vector<double>& alphas) {
  cfg.validate();
  Sweep sweep;
  for (double alpha : alphas) {
    if (!(alpha >= 0.0 && alpha < 1.0)) {
      throw std::invalid_argument("sweep_alpha: alpha must lie in [0,1)");
    }
    SweepRow row;
    row.alpha = alpha;
    row.m = prefix_size(alpha, cfg.n);
    row.bounds = phi_objective_bounds(PrefixSet::initial_segment(row.m), cfg);
    if (!sweep.rows.empty() &&
        row.bounds.upper < sweep.rows[sweep.argmin_upper].bounds.upper) {
      sweep.argmin_upper = sweep.rows.size();
    }
    sweep.rows.push_back(row);
  }
  return sweep;
}

std::vector<double> alpha_grid(double step) {
  if (!(step > 0.0 && step < 1.0)) {
    throw std::invalid_argument("alpha_grid: step must lie in (0,1)");
  }
  std::vector<double> grid;
  for (int k = 0;; ++k) {
    const double a = k * step;
    if (a >= 1.0 - 1e-12) break;
    grid.push_back(a);
  }
  return grid;
}

double per_sample_kl(double sum_sq, double phi_comp, const ToyConfig& cfg) {
  const double d = static_cast<double>(cfg.d_dim);
  return 0.5 * d * psi(cfg.kappa_var() / phi_comp) + sum_sq / (2.0 * phi_comp);
}

LearnerDraw simulate_learner(const ToyConfig& cfg, const PrefixSet& j,
                             Rng& rng) {
  const int n = cfg.n;
  const int k = cfg.k_dim;
  const int d = cfg.d_dim;
  const EtaSums eta = eta_sums(j, cfg);
  const double eta1_all = eta.eta1_j + eta.eta1_comp;
  const double phi_comp = phi(eta.eta2_comp, cfg);

  // u spread evenly over the K signal coordinates with ||u||^2 = tau / sum eta.
  const double u_coord =
      std::sqrt(cfg.tau / eta1_all / static_cast<double>(k));
  const double x_sd = std::sqrt(cfg.sigma_sq() / static_cast<double>(d));
  const double xi_sd = std::sqrt(cfg.kappa_var());

  std::normal_distribution<double> normal(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);

  std::vector<int> y(static_cast<std::size_t>(n));
  std::vector<double> x2(static_cast<std::size_t>(n) * d);
  std::vector<double> w1(static_cast<std::size_t>(k), 0.0);
  std::vector<double> w2(static_cast<std::size_t>(d), 0.0);
  std::vector<double> comp_sum(static_cast<std::size_t>(d), 0.0);

  for (int i = 1; i <= n; ++i) {
    const int yi = coin(rng) ? 1 : -1;
    y[i - 1] = yi;
    double* xi = &x2[static_cast<std::size_t>(i - 1) * d];
    for (int c = 0; c < d; ++c) xi[c] = x_sd * normal(rng);

    const double step = 1.0 / static_cast<double>(i);
    for (int c = 0; c < k; ++c) w1[c] += step * yi * (yi * u_coord);
    const bool held_out = !j.contains(i);
    for (int c = 0; c < d; ++c) {
      const double inc = step * yi * xi[c];
      w2[c] += inc;
      if (held_out) comp_sum[c] += inc;
    }
  }

  LearnerDraw draw;
  draw.signal_weight = w1[0];
  double sum_sq = 0.0;
  for (double s : comp_sum) sum_sq += s * s;
  draw.kl = per_sample_kl(sum_sq, phi_comp, cfg);

  for (int c = 0; c < d; ++c) w2[c] += xi_sd * normal(rng);

  int errors_comp = 0;
  int errors_all = 0;
  for (int i = 1; i <= n; ++i) {
    const int yi = y[i - 1];
    double score = 0.0;
    for (int c = 0; c < k; ++c) score += w1[c] * (yi * u_coord);
    const double* xi = &x2[static_cast<std::size_t>(i - 1) * d];
    for (int c = 0; c < d; ++c) score += w2[c] * xi[c];
    const bool mistake = yi * score <= 0.0;
    errors_all += mistake;
    if (!j.contains(i)) errors_comp += mistake;
  }
  const auto n_comp = static_cast<double>(n) - static_cast<double>(j.size());
  draw.risk_full = errors_all / static_cast<double>(n);
  draw.risk_comp = n_comp > 0 ? errors_comp / n_comp : 0.0;
  return draw;
}

SimResult mc_simulate(const ToyConfig& cfg, const PrefixSet& j,
                      const SimOptions& opts, Rng& rng) {
  if (opts.trials < 1) throw std::invalid_argument("trials must be >= 1");
  const EtaSums eta = eta_sums(j, cfg);
  const double phi_comp = phi(eta.eta2_comp, cfg);
  const int d = cfg.d_dim;
  // Each s_j is a sum of independent Gaussians with total variance
  // eta2_comp sigma^2 / D, so sum_j s_j^2 is a scaled chi-square with D dof.
  const double scale = eta.eta2_comp * cfg.sigma_sq() / static_cast<double>(d);
  std::chi_squared_distribution<double> chi2(static_cast<double>(d));
  Welford kl;
  for (std::size_t t = 0; t < opts.trials; ++t) {
    kl.add(per_sample_kl(scale * chi2(rng), phi_comp, cfg));
  }

  Welford kl_full;
  Welford risk_comp;
  Welford risk_full;
  for (std::size_t t = 0; t < opts.risk_trials; ++t) {
    const LearnerDraw draw = simulate_learner(cfg, j, rng);
    kl_full.add(draw.kl);
    risk_comp.add(draw.risk_comp);
    risk_full.add(draw.risk_full);
  }

  SimResult r;
  r.trials = opts.trials;
  r.risk_trials = opts.risk_trials;
  r.mean_kl = kl.mean;
  r.kl_stderr = kl.stderr_of_mean();
  r.mean_kl_full = kl_full.mean;
  r.kl_full_stderr = kl_full.stderr_of_mean();
  r.mean_emp_risk_comp = risk_comp.mean;
  r.risk_comp_stderr = risk_comp.stderr_of_mean();
  r.mean_emp_risk_full = risk_full.mean;
  r.risk_full_stderr = risk_full.stderr_of_mean();
  return r;
}

double information_rate_gain(const PrefixSet& j, const ToyConfig& cfg) {
  j.check_within(cfg.n);
  const auto n = static_cast<double>(cfg.n);
  const double m = static_cast<double>(j.size());
  if (m >= n) throw std::invalid_argument("J must be a proper subset of [n]");
  const double mi = cond_mutual_info(PrefixSet{}, cfg);
  return mi / n - cond_mutual_info(j, cfg) / (n - m);
}

ExcessBias excess_bias_mc(const PrefixSet& j, const ToyConfig& cfg,
                          std::size_t trials, Rng& rng, bool random_subset) {
  j.check_within(cfg.n);
  if (j.size() >= static_cast<std::size_t>(cfg.n)) {
    throw std::invalid_argument("J must be a proper subset of [n]");
  }
  if (trials < 1) throw std::invalid_argument("trials must be >= 1");
  std::vector<int> pool(static_cast<std::size_t>(cfg.n));
  std::iota(pool.begin(), pool.end(), 1);

  Welford diff;
  Welford comp;
  Welford full;
  for (std::size_t t = 0; t < trials; ++t) {
    PrefixSet subset = j;
    if (random_subset) {
      std::shuffle(pool.begin(), pool.end(), rng);
      subset = PrefixSet(std::vector<int>(
          pool.begin(), pool.begin() + static_cast<long>(j.size())));
    }
    const LearnerDraw draw = simulate_learner(cfg, subset, rng);
    diff.add(draw.risk_comp - draw.risk_full);
    comp.add(draw.risk_comp);
    full.add(draw.risk_full);
  }
  return {diff.mean, diff.stderr_of_mean(), comp.mean, full.mean};
}

double expected_linear_bound(const PrefixSet& j, const ToyConfig& cfg,
                             double beta, double expected_risk) {
  if (!(beta > 0.0 && beta < 1.0)) {
    throw std::invalid_argument("beta must lie in (0,1)");
  }
  const auto n_eval = static_cast<double>(cfg.n) - static_cast<double>(j.size());
  if (n_eval < 1.0) throw std::invalid_argument("empty evaluation set");
  return expected_risk / beta +
         (cond_mutual_info(j, cfg) + std::log(1.0 / cfg.delta)) /
             (2.0 * beta * (1.0 - beta) * n_eval);
}

double prop1_margin(const PrefixSet& j, const ToyConfig& cfg, double beta,
                    double excess_bias) {
  const auto n = static_cast<double>(cfg.n);
  const double m = static_cast<double>(j.size());
  return information_rate_gain(j, cfg) - 2.0 * (1.0 - beta) * excess_bias -
         std::log(1.0 / cfg.delta) / n * m / (n - m);
}

}  // namespace ddpb::toy
