#include "ddpb/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "ddpb/error.hpp"
#include "ddpb/gaussian.hpp"
#include "ddpb/rng.hpp"

namespace ddpb {

namespace {

struct Trained {
  Architecture arch;
  std::size_t n = 0;
  std::size_t m = 0;
  RunSpec spec;
  DataOrder order;
  SgdState coupled;
};

RunSpec run_spec(const ExperimentConfig& cfg, const CellSpec& cell,
                 std::size_t n) {
  RunSpec spec;
  spec.alpha = cell.alpha;
  spec.batch = cfg.batch;
  spec.epsilon = cell.epsilon;
  spec.max_steps = cfg.max_epochs * (n / cfg.batch);
  spec.learning_rate = cfg.learning_rate;
  spec.momentum = cfg.momentum;
  spec.validate(n);
  return spec;
}

Trained couple(const Dataset& train, const ExperimentConfig& cfg,
               const CellSpec& cell) {
  Architecture arch(cfg.layer_sizes);
  arch.check_dataset(train);
  const std::size_t n = train.size();
  RunSpec spec = run_spec(cfg, cell, n);
  const std::size_t m = spec.prefix_size(n);
  if (m == n) throw ConfigError("alpha leaves no evaluation data");
  DataOrder order(derive_seed(cell.seed, "order"), n, m);
  SgdState coupled =
      coupling_run(arch, init_weights(arch, cell.seed), train, order, spec);
  return {std::move(arch), n, m, spec, order, std::move(coupled)};
}

void require_finite(std::span<const float> w, const char* what) {
  for (float v : w) {
    if (!std::isfinite(v)) throw NumericError(std::string(what) + " diverged");
  }
}

RiskFn eval_risk(const Architecture& arch, const Dataset& data,
                 std::size_t begin, std::size_t end) {
  return [&arch, &data, begin, end](std::span<const double> w) {
    const std::vector<float> wf = to_float(w);
    return zero_one_error<float>(arch, wf, data, begin, end);
  };
}

double sq_dist(std::span<const float> a, std::span<const float> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    s += d * d;
  }
  return s;
}

}  // namespace

DeltaAccounting delta_accounting(const ExperimentConfig& cfg,
                                 std::size_t sigma_grid, std::size_t t_grid) {
  DeltaAccounting acc;
  acc.delta = cfg.delta;
  acc.sigma_grid = sigma_grid;
  acc.t_grid = t_grid;
  acc.grid_size = sigma_grid * t_grid;
  acc.delta_bound = union_adjusted_delta(cfg.delta, acc.grid_size);
  acc.delta_mc_total = cfg.delta * cfg.delta_mc_fraction;
  acc.delta_mc_each = acc.delta_mc_total / static_cast<double>(sigma_grid);
  return acc;
}

SeedAggregate aggregate(std::span<const double> values) {
  SeedAggregate agg;
  agg.count = values.size();
  if (values.empty()) return agg;
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  agg.mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / n;
  if (sorted.size() > 1) {
    double ss = 0.0;
    for (double v : sorted) ss += (v - agg.mean) * (v - agg.mean);
    agg.std = std::sqrt(ss / (n - 1.0));
  }
  return agg;
}

double gibbs_error(const Architecture& arch, std::span<const double> mean,
                   double variance, const Dataset& data, std::size_t begin,
                   std::size_t end, std::size_t samples, Rng& rng) {
  const GaussianSpec q = GaussianSpec::isotropic({mean.begin(), mean.end()}, variance);
  std::vector<double> w(q.dim());
  double total = 0.0;
  for (std::size_t s = 0; s < samples; ++s) {
    q.sample(rng, w);
    const std::vector<float> wf = to_float(w);
    total += zero_one_error<float>(arch, wf, data, begin, end);
  }
  return total / static_cast<double>(samples);
}

std::vector<std::vector<float>> prefix_prior_means(
    const Architecture& arch, const Dataset& train, const ExperimentConfig& cfg,
    const CellSpec& cell, const std::vector<std::size_t>& t_grid) {
  const std::size_t n = train.size();
  const RunSpec spec = run_spec(cfg, cell, n);
  const std::size_t m = spec.prefix_size(n);
  const DataOrder order(derive_seed(cell.seed, "order"), n, m);
  const SgdState coupled =
      coupling_run(arch, init_weights(arch, cell.seed), train, order, spec);
  const RunTrace trace = prefix_run(arch, coupled, train, order, spec, t_grid);
  std::vector<std::vector<float>> out;
  for (std::size_t t : t_grid) out.push_back(trace.at(prefix_checkpoint_name(t)));
  return out;
}

BoundExperimentResult get_bound(const Dataset& train, const Dataset* ghost,
                                const Dataset& test, const ExperimentConfig& cfg,
                                const CellSpec& cell) {
  Trained tr = couple(train, cfg, cell);
  const Architecture& arch = tr.arch;
  const RunTrace base = base_run(arch, tr.coupled, train, tr.order, tr.spec);
  const std::vector<float>& w_s = base.at("base_end");
  require_finite(w_s, "base run");

  const bool use_ghost = ghost != nullptr;
  const std::vector<std::size_t> t_grid =
      use_ghost ? cfg.ghost_t_grid(tr.n) : cfg.prefix_t_grid(tr.m);
  const RunTrace prior_trace =
      use_ghost ? ghost_run(arch, tr.coupled, train, *ghost, tr.order, tr.spec, t_grid)
                : prefix_run(arch, tr.coupled, train, tr.order, tr.spec, t_grid);
  std::vector<const std::vector<float>*> priors;
  std::vector<double> sq;
  for (std::size_t t : t_grid) {
    const auto& w = prior_trace.at(use_ghost ? ghost_checkpoint_name(t)
                                             : prefix_checkpoint_name(t));
    require_finite(w, "prior run");
    priors.push_back(&w);
    sq.push_back(sq_dist(w_s, w));
  }

  BoundExperimentResult res;
  res.cell = cell;
  res.prior_source = use_ghost ? "ghost" : "prefix";
  res.m = tr.m;
  res.n = tr.n;
  res.n_eval = tr.n - tr.m;
  res.train_error = base.final_train_error;
  res.base_steps = base.step_count;
  res.accounting = delta_accounting(cfg, cfg.sigma_p_grid.size(), t_grid.size());
  const std::vector<double> w_s_d = to_double(w_s);
  const RiskFn risk = eval_risk(arch, train, tr.m, tr.n);
  const double min_sq = *std::min_element(sq.begin(), sq.end());
  const std::size_t p = arch.parameter_count();

  double best = std::numeric_limits<double>::infinity();
  std::size_t best_idx = 0;
  for (std::size_t j = 0; j < cfg.sigma_p_grid.size(); ++j) {
    const double sigma = cfg.sigma_p_grid[j];
    // The bound is increasing in both risk and KL, so a zero-risk bound at
    // the closest prior caps what this variance can achieve.
    const double floor_bound =
        variational_kl_bound(0.0, maurer_b_term(kl_isotropic(min_sq, p, sigma, sigma),
                                                res.n_eval,
                                                res.accounting.delta_bound))
            .final_bound;
    GibbsRiskEstimate est;
    const bool evaluate = floor_bound < best;
    if (evaluate) {
      Rng rng = make_stream(derive_seed(cell.seed, "mc", tr.m), "sigma", j);
      est = mc_gibbs_risk(GaussianSpec::isotropic(w_s_d, sigma), risk, res.n_eval,
                          cfg.mc_samples, res.accounting.delta_mc_each, rng);
    }
    for (std::size_t k = 0; k < t_grid.size(); ++k) {
      Candidate c;
      c.sigma_p = sigma;
      c.t = t_grid[k];
      c.kl = kl_isotropic(sq[k], p, sigma, sigma);
      c.evaluated = evaluate;
      if (evaluate) {
        c.risk = est;
        c.report = evaluate_bound(
            {est.upper, c.kl, res.n_eval, res.accounting.delta_bound});
        c.report.delta_mc = res.accounting.delta_mc_each;
        if (c.report.final_bound < best) {
          best = c.report.final_bound;
          best_idx = res.candidates.size();
        }
      }
      res.candidates.push_back(c);
    }
  }

  const Candidate& sel = res.candidates.at(best_idx);
  res.sigma_p_selected = sel.sigma_p;
  res.t_selected = sel.t;
  res.kl = sel.kl;
  res.gibbs_risk = sel.risk;
  res.bound_report = sel.report;
  const std::size_t k_sel = static_cast<std::size_t>(
      std::find(t_grid.begin(), t_grid.end(), sel.t) - t_grid.begin());
  res.posterior_mean = w_s_d;
  res.prior_mean = to_double(*priors[k_sel]);
  res.d_alpha = scaled_l2(res.posterior_mean, res.prior_mean, cell.alpha, tr.n);

  Rng test_rng = make_stream(derive_seed(cell.seed, "test", tr.m), "gibbs");
  res.test_error = gibbs_error(arch, w_s_d, sel.sigma_p, test, 0, test.size(),
                               cfg.test_mc_samples, test_rng);
  return res;
}

Surrogate moment_surrogate(double loss, double b_term) {
  if (!(b_term > 0.0)) throw NumericError("surrogate needs B > 0");
  const double root = std::sqrt(b_term * (b_term + 2.0 * loss));
  Surrogate s;
  s.value = loss + b_term + root;
  s.d_loss = 1.0 + b_term / root;
  s.d_b = 1.0 + (b_term + loss) / root;
  return s;
}

SurrogateEval isotropic_surrogate(const Architecture& arch, const Dataset& data,
                                  std::span<const std::size_t> batch,
                                  std::span<const double> mean, double log_var,
                                  std::span<const double> prior_mean,
                                  double sigma_p, std::span<const double> eps,
                                  std::size_t n_eval, double log_term,
                                  Workspace<double>& ws) {
  const std::size_t p = mean.size();
  const double var = std::exp(log_var);
  const double sd = std::sqrt(var);
  std::vector<double> w(p);
  for (std::size_t i = 0; i < p; ++i) w[i] = mean[i] + sd * eps[i];
  SurrogateEval out;
  out.grad_mean.resize(p);
  out.loss = forward_backward<double>(arch, w, data, batch, out.grad_mean, ws);
  out.kl = kl_isotropic(squared_distance(mean, prior_mean), p, var, sigma_p);
  const Surrogate sur =
      moment_surrogate(out.loss, (out.kl + log_term) / static_cast<double>(n_eval));
  out.value = sur.value;

  const double kl_scale = sur.d_b / static_cast<double>(n_eval);
  double g_eps = 0.0;
  for (std::size_t i = 0; i < p; ++i) g_eps += out.grad_mean[i] * eps[i];
  out.grad_log_var = {sur.d_loss * 0.5 * sd * g_eps +
                      kl_scale * 0.5 * static_cast<double>(p) * (var / sigma_p - 1.0)};
  for (std::size_t i = 0; i < p; ++i) {
    out.grad_mean[i] = sur.d_loss * out.grad_mean[i] +
                       kl_scale * (mean[i] - prior_mean[i]) / sigma_p;
  }
  return out;
}

SurrogateEval oracle_surrogate(const Architecture& arch, const Dataset& data,
                               std::span<const std::size_t> batch,
                               std::span<const double> mean,
                               std::span<const double> log_var,
                               std::span<const double> prior_mean,
                               std::span<const double> eps, std::size_t n_eval,
                               double log_term, Workspace<double>& ws) {
  const std::size_t p = mean.size();
  std::vector<double> w(p), sd(p), d2(p), grad(p);
  SurrogateEval out;
  for (std::size_t i = 0; i < p; ++i) {
    sd[i] = std::exp(0.5 * log_var[i]);
    w[i] = mean[i] + sd[i] * eps[i];
    const double d = mean[i] - prior_mean[i];
    d2[i] = d * d;
    out.kl += 0.5 * std::log1p(d2[i] / (sd[i] * sd[i]));
  }
  out.loss = forward_backward<double>(arch, w, data, batch, grad, ws);
  const Surrogate sur =
      moment_surrogate(out.loss, (out.kl + log_term) / static_cast<double>(n_eval));
  out.value = sur.value;
  const double kl_scale = sur.d_b / static_cast<double>(n_eval);
  out.grad_log_var.resize(p);
  for (std::size_t i = 0; i < p; ++i) {
    out.grad_log_var[i] = sur.d_loss * 0.5 * sd[i] * grad[i] * eps[i] -
                          kl_scale * 0.5 * d2[i] / (sd[i] * sd[i] + d2[i]);
  }
  return out;
}

BoundOptResult bound_opt(const Dataset& train, const Dataset& test,
                         const ExperimentConfig& cfg, const CellSpec& cell,
                         std::size_t steps) {
  Trained tr = couple(train, cfg, cell);
  const Architecture& arch = tr.arch;
  const std::vector<std::size_t> t_grid = cfg.prefix_t_grid(tr.m);
  const std::size_t t_prior = t_grid.back();
  const RunTrace prior_trace =
      prefix_run(arch, tr.coupled, train, tr.order, tr.spec, {t_prior});
  const std::vector<float>& w_prior_f = prior_trace.at(prefix_checkpoint_name(t_prior));
  require_finite(w_prior_f, "prior run");
  const std::vector<double> w_prior = to_double(w_prior_f);

  const std::size_t n_eval = tr.n - tr.m;
  const std::size_t p = arch.parameter_count();
  const DeltaAccounting acc =
      delta_accounting(cfg, cfg.bound_opt_sigma_p_grid.size(), 1);
  const double log_term =
      std::log(2.0 * std::sqrt(static_cast<double>(n_eval)) / acc.delta_bound);
  const RiskFn risk = eval_risk(arch, train, tr.m, tr.n);
  const std::size_t b = cfg.batch;
  const std::size_t batches_per_epoch = n_eval / b;

  BoundOptResult best;
  best.result.bound_report.final_bound = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < cfg.bound_opt_sigma_p_grid.size(); ++j) {
    const double sigma_p = cfg.bound_opt_sigma_p_grid[j];
    std::vector<double> w = w_prior;
    double s = std::log(sigma_p);
    std::vector<double> vw(p, 0.0);
    double vs = 0.0;
    std::vector<double> eps(p);
    std::vector<std::size_t> batch(b);
    Workspace<double> ws;
    Rng noise = make_stream(derive_seed(cell.seed, "bound_opt_noise", tr.m), "sigma", j);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<OptTracePoint> trace;
    double window = 0.0;
    std::vector<std::size_t> order;
    for (std::size_t step = 0; step < steps; ++step) {
      const std::size_t pos = step % batches_per_epoch;
      if (pos == 0) {
        order.resize(n_eval);
        std::iota(order.begin(), order.end(), tr.m);
        Rng shuffle = make_stream(derive_seed(cell.seed, "bound_opt_order", tr.m),
                                  "epoch", step / batches_per_epoch);
        for (std::size_t i = order.size(); i > 1; --i) {
          std::swap(order[i - 1], order[static_cast<std::size_t>(shuffle() % i)]);
        }
      }
      std::copy_n(order.begin() + static_cast<std::ptrdiff_t>(pos * b), b, batch.begin());

      for (std::size_t i = 0; i < p; ++i) eps[i] = normal(noise);
      const SurrogateEval ev = isotropic_surrogate(arch, train, batch, w, s, w_prior,
                                                   sigma_p, eps, n_eval, log_term, ws);
      const double loss = ev.loss;
      window += ev.value;
      if ((step + 1) % cfg.bound_opt_log_every == 0) {
        trace.push_back({step + 1, window / static_cast<double>(cfg.bound_opt_log_every)});
        window = 0.0;
      }
      for (std::size_t i = 0; i < p; ++i) {
        vw[i] = cfg.momentum * vw[i] + ev.grad_mean[i];
        w[i] -= cfg.bound_opt_learning_rate * vw[i];
      }
      vs = cfg.momentum * vs + ev.grad_log_var[0];
      s -= cfg.bound_opt_learning_rate * vs;
      if (!std::isfinite(s) || !std::isfinite(loss)) {
        throw NumericError("bound optimization diverged");
      }
    }

    const double var = std::exp(s);
    const double kl = kl_isotropic(squared_distance(w, w_prior), p, var, sigma_p);
    Rng rng = make_stream(derive_seed(cell.seed, "mc", tr.m), "opt_sigma", j);
    const GibbsRiskEstimate est =
        mc_gibbs_risk(GaussianSpec::isotropic(w, var), risk, n_eval,
                      cfg.mc_samples, acc.delta_mc_each, rng);
    BoundReport report = evaluate_bound({est.upper, kl, n_eval, acc.delta_bound});
    report.delta_mc = acc.delta_mc_each;
    if (report.final_bound < best.result.bound_report.final_bound) {
      BoundExperimentResult& r = best.result;
      r.cell = cell;
      r.prior_source = "prefix";
      r.m = tr.m;
      r.n = tr.n;
      r.n_eval = n_eval;
      r.sigma_p_selected = sigma_p;
      r.t_selected = t_prior;
      r.kl = kl;
      r.gibbs_risk = est;
      r.bound_report = report;
      r.accounting = acc;
      r.posterior_mean = w;
      r.prior_mean = w_prior;
      r.d_alpha = scaled_l2(w, w_prior, cell.alpha, tr.n);
      best.posterior_variance = var;
      best.trace = std::move(trace);
    }
  }

  BoundExperimentResult& r = best.result;
  Rng test_rng = make_stream(derive_seed(cell.seed, "test", tr.m), "bound_opt");
  r.test_error = gibbs_error(arch, r.posterior_mean, best.posterior_variance, test,
                             0, test.size(), cfg.test_mc_samples, test_rng);
  r.train_error = zero_one_error<float>(arch, to_float(r.posterior_mean), train);
  return best;
}

OracleVarianceRow oracle_variance_study(const Dataset& train, const Dataset& test,
                                        const ExperimentConfig& cfg,
                                        const CellSpec& cell) {
  const BoundExperimentResult iso = get_bound(train, nullptr, test, cfg, cell);
  const Architecture arch(cfg.layer_sizes);
  const std::size_t p = arch.parameter_count();
  const std::size_t m = iso.m;
  const std::size_t n_eval = iso.n_eval;
  const double sigma_p = iso.sigma_p_selected;
  const std::vector<double>& w_s = iso.posterior_mean;
  const std::vector<double>& w_p = iso.prior_mean;
  const double delta_bound = iso.accounting.delta_bound;
  const double log_term =
      std::log(2.0 * std::sqrt(static_cast<double>(n_eval)) / delta_bound);

  OracleVarianceRow row;
  row.alpha = cell.alpha;
  row.seed = cell.seed;
  row.sigma_p = sigma_p;
  row.isotropic_kl = iso.kl;
  row.isotropic_bound = iso.bound_report.final_bound;

  // Start point: the isotropic posterior with its already-certified risk.
  const GaussianSpec q0 = GaussianSpec::isotropic(w_s, sigma_p);
  const double kl0 = oracle_variance_kl(q0, w_p);
  double best_kl = kl0;
  double best_bound =
      evaluate_bound({iso.gibbs_risk.upper, kl0, n_eval, delta_bound}).final_bound;

  if (cfg.oracle_variance_steps > 0) {
    std::vector<double> v(p, std::log(sigma_p));
    std::vector<double> vel(p, 0.0);
    std::vector<double> eps(p);
    std::vector<std::size_t> batch(cfg.batch);
    Workspace<double> ws;
    Rng noise = make_stream(cell.seed, "oracle_noise", m);
    std::normal_distribution<double> normal(0.0, 1.0);
    const std::size_t batches = n_eval / cfg.batch;
    std::vector<std::size_t> order;
    for (std::size_t step = 0; step < cfg.oracle_variance_steps; ++step) {
      const std::size_t pos = step % batches;
      if (pos == 0) {
        order.resize(n_eval);
        std::iota(order.begin(), order.end(), m);
        Rng shuffle = make_stream(derive_seed(cell.seed, "oracle_order", m), "epoch",
                                  step / batches);
        for (std::size_t i = order.size(); i > 1; --i) {
          std::swap(order[i - 1], order[static_cast<std::size_t>(shuffle() % i)]);
        }
      }
      std::copy_n(order.begin() + static_cast<std::ptrdiff_t>(pos * cfg.batch),
                  cfg.batch, batch.begin());
      for (std::size_t i = 0; i < p; ++i) eps[i] = normal(noise);
      const SurrogateEval ev = oracle_surrogate(arch, train, batch, w_s, v, w_p, eps,
                                                n_eval, log_term, ws);
      const double loss = ev.loss;
      for (std::size_t i = 0; i < p; ++i) {
        vel[i] = cfg.momentum * vel[i] + ev.grad_log_var[i];
        v[i] -= cfg.oracle_variance_learning_rate * vel[i];
      }
      if (!std::isfinite(loss)) throw NumericError("variance optimization diverged");
    }

    std::vector<double> var(p);
    for (std::size_t i = 0; i < p; ++i) var[i] = std::exp(v[i]);
    const GaussianSpec q1(w_s, var);
    const double kl1 = oracle_variance_kl(q1, w_p);
    Rng rng = make_stream(derive_seed(cell.seed, "mc", m), "oracle");
    const GibbsRiskEstimate est =
        mc_gibbs_risk(q1, eval_risk(arch, train, m, iso.n), n_eval, cfg.mc_samples,
                      iso.accounting.delta_mc_each, rng);
    const double bound1 =
        evaluate_bound({est.upper, kl1, n_eval, delta_bound}).final_bound;
    if (bound1 < best_bound) {
      best_bound = bound1;
      best_kl = kl1;
    }
  }
  row.oracle_kl = best_kl;
  row.oracle_bound = best_bound;
  return row;
}

L2Row l2_sweep(const Dataset& train, const Dataset& ghost,
               const ExperimentConfig& cfg, const CellSpec& cell) {
  Trained tr = couple(train, cfg, cell);
  const Architecture& arch = tr.arch;
  const RunTrace base = base_run(arch, tr.coupled, train, tr.order, tr.spec);
  const std::vector<double> w_s = to_double(base.at("base_end"));

  L2Row row;
  row.alpha = cell.alpha;
  row.seed = cell.seed;
  row.d_prefix = std::numeric_limits<double>::infinity();
  row.d_ghost = std::numeric_limits<double>::infinity();

  const auto prefix_grid = cfg.prefix_t_grid(tr.m);
  const RunTrace prefix =
      prefix_run(arch, tr.coupled, train, tr.order, tr.spec, prefix_grid);
  std::vector<double> closest;
  for (std::size_t t : prefix_grid) {
    const std::vector<double> w = to_double(prefix.at(prefix_checkpoint_name(t)));
    const double d = scaled_l2(w_s, w, cell.alpha, tr.n);
    if (d < row.d_prefix) {
      row.d_prefix = d;
      row.t_prefix = t;
      closest = w;
    }
  }

  const auto ghost_grid = cfg.ghost_t_grid(tr.n);
  const RunTrace gh =
      ghost_run(arch, tr.coupled, train, ghost, tr.order, tr.spec, ghost_grid);
  for (std::size_t t : ghost_grid) {
    const std::vector<double> w = to_double(gh.at(ghost_checkpoint_name(t)));
    const double d = scaled_l2(w_s, w, cell.alpha, tr.n);
    if (d < row.d_ghost) {
      row.d_ghost = d;
      row.t_ghost = t;
    }
  }

  const std::size_t k = std::min(cfg.scatter_params, w_s.size());
  row.scatter_base.assign(w_s.begin(), w_s.begin() + static_cast<std::ptrdiff_t>(k));
  row.scatter_prefix.assign(closest.begin(),
                            closest.begin() + static_cast<std::ptrdiff_t>(k));
  return row;
}

}  // namespace ddpb
