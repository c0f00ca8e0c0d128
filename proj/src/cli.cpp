#include "ddpb/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <mutex>
#include <optional>
#include <thread>

#include <unistd.h>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ddpb/bounds.hpp"
#include "ddpb/config.hpp"
#include "ddpb/error.hpp"
#include "ddpb/pipeline.hpp"
#include "ddpb/results.hpp"
#include "ddpb/rng.hpp"
#include "ddpb/toy_model.hpp"

namespace ddpb {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonArgs {
  std::string config;
  std::string out;
  std::vector<std::string> overrides;
  bool dry_run = false;
  unsigned jobs = 1;
};

fs::path output_dir(const std::string& requested, const std::string& command) {
  if (!requested.empty()) return requested;
  const char* root = std::getenv("DDPB_OUTPUT_ROOT");
  return fs::path(root && *root ? root : "results") / command;
}

/// Collects files in a scratch directory and moves it into place at commit.
class OutputDir {
 public:
  explicit OutputDir(fs::path target) : target_(std::move(target)) {
    if (fs::exists(target_) && !fs::is_empty(target_) &&
        !fs::exists(target_ / "manifest.json")) {
      throw ConfigError("refusing to replace non-result directory " +
                        target_.string());
    }
    const fs::path parent =
        target_.has_parent_path() ? target_.parent_path() : fs::path(".");
    fs::create_directories(parent);
    staging_ = parent / ("." + target_.filename().string() + ".tmp-" +
                         fnv1a_hex(target_.string() + std::to_string(::getpid())));
    fs::remove_all(staging_);
    fs::create_directories(staging_);
  }
  ~OutputDir() {
    std::error_code ec;
    if (!committed_) fs::remove_all(staging_, ec);
  }
  OutputDir(const OutputDir&) = delete;
  OutputDir& operator=(const OutputDir&) = delete;

  fs::path file(const std::string& name) const { return staging_ / name; }

  void commit() {
    if (fs::exists(target_)) fs::remove_all(target_);
    fs::rename(staging_, target_);
    committed_ = true;
  }

  const fs::path& target() const { return target_; }

 private:
  fs::path target_;
  fs::path staging_;
  bool committed_ = false;
};

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

/// Runs fn(i) for i in [0, count) on up to `jobs` threads.
void fan_out(std::size_t count, unsigned jobs,
             const std::function<void(std::size_t)>& fn) {
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(count)));
  if (jobs == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < jobs; ++t) {
    pool.emplace_back([&] {
      while (true) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(mu);
          if (!failure) failure = std::current_exception();
          next = count;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

std::size_t effective_n(const ExperimentConfig& cfg) {
  return cfg.dataset.n - cfg.dataset.n % cfg.batch;
}

std::size_t prefix_of(double alpha, std::size_t n) {
  return static_cast<std::size_t>(toy::prefix_size(alpha, static_cast<int>(n)));
}

json accounting_json(const DeltaAccounting& a) {
  return json{{"delta", a.delta},
              {"sigma_grid", a.sigma_grid},
              {"t_grid", a.t_grid},
              {"grid_size", a.grid_size},
              {"delta_bound", a.delta_bound},
              {"delta_mc_total", a.delta_mc_total},
              {"delta_mc_each", a.delta_mc_each}};
}

/// Grid and confidence accounting, computable before any data is read.
json plan_json(const std::string& command, const ExperimentConfig& cfg,
               bool ghost_priors) {
  const std::size_t n = effective_n(cfg);
  json per_alpha = json::array();
  for (double a : cfg.alphas) {
    const std::size_t m = prefix_of(a, n);
    json entry{{"alpha", a}, {"m", m}, {"n_eval", n - m}};
    if (command == "direct-opt") {
      entry["t_grid"] = {cfg.prefix_t_grid(m).back()};
      entry["delta_accounting"] =
          accounting_json(delta_accounting(cfg, cfg.bound_opt_sigma_p_grid.size(), 1));
    } else if (command == "l2-sweep") {
      entry["t_grid_prefix"] = cfg.prefix_t_grid(m);
      entry["t_grid_ghost"] = cfg.ghost_t_grid(n);
    } else {
      const auto t_grid = ghost_priors ? cfg.ghost_t_grid(n) : cfg.prefix_t_grid(m);
      entry["t_grid"] = t_grid;
      entry["delta_accounting"] = accounting_json(
          delta_accounting(cfg, cfg.sigma_p_grid.size(), t_grid.size()));
    }
    per_alpha.push_back(entry);
  }
  return json{{"command", command},
              {"n", n},
              {"prior_source", ghost_priors ? "ghost" : "prefix"},
              {"alphas", per_alpha},
              {"sigma_p_grid", command == "direct-opt" ? cfg.bound_opt_sigma_p_grid
                                                       : cfg.sigma_p_grid},
              {"epsilons", cfg.epsilons},
              {"seeds", cfg.seeds}};
}

json manifest_json(const std::string& command, const ExperimentConfig& cfg,
                   const json& plan, const std::vector<std::string>& outputs) {
  return json{{"command", command},
              {"config", to_json(cfg)},
              {"config_hash", config_hash(cfg)},
              {"code_version", code_version()},
              {"plan", plan},
              {"seeds", cfg.seeds},
              {"grids_declared_before_data", true},
              {"outputs", outputs}};
}

std::string fmt(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", digits, v);
  return buf;
}

void print_alpha_summary(const std::vector<double>& alphas,
                         const std::vector<std::vector<double>>& by_alpha,
                         const char* label) {
  std::size_t best = 0;
  std::vector<double> means;
  for (const auto& v : by_alpha) means.push_back(aggregate(v).mean);
  for (std::size_t i = 1; i < means.size(); ++i) {
    if (means[i] < means[best]) best = i;
  }
  std::cout << "argmin alpha=" << fmt(alphas[best]) << " mean " << label << "="
            << fmt(means[best]) << '\n';
}

int cmd_toy_fig1(const std::string& preset, std::size_t trials, double step,
                 const std::string& out_arg) {
  const auto cfg = toy::ToyConfig::preset(preset);
  if (!cfg) throw ConfigError("unknown preset: " + preset);
  const auto alphas = toy::alpha_grid(step);
  const toy::Sweep sweep = toy::sweep_alpha(*cfg, alphas);

  Table table(schema::kToyFig1);
  for (const auto& row : sweep.rows) {
    double mc_kl = 0.0;
    double mc_se = 0.0;
    if (trials > 0) {
      Rng rng = make_stream(0, "toy_fig1", static_cast<std::uint64_t>(row.m));
      const auto sim = toy::mc_simulate(
          *cfg, toy::PrefixSet::initial_segment(row.m), {trials, 0}, rng);
      mc_kl = sim.mean_kl;
      mc_se = sim.kl_stderr;
    }
    table.add_row({row.alpha, static_cast<long long>(row.m), row.bounds.c_of_j,
                   row.bounds.r_bar, row.bounds.lower, row.bounds.upper, mc_kl,
                   mc_se});
  }
  OutputDir out(output_dir(out_arg, "toy-fig1"));
  write_csv(out.file("toy_fig1.csv"), table);
  write_json(out.file("manifest.json"),
             json{{"command", "toy-fig1"},
                  {"preset", preset},
                  {"toy_config",
                   {{"n", cfg->n},
                    {"d_dim", cfg->d_dim},
                    {"k_dim", cfg->k_dim},
                    {"sigma_sq", cfg->sigma_sq()},
                    {"kappa_var", cfg->kappa_var()},
                    {"tau", cfg->tau},
                    {"delta", cfg->delta}}},
                  {"alpha_step", step},
                  {"mc_trials", trials},
                  {"code_version", code_version()},
                  {"outputs", {"toy_fig1.csv"}}});
  out.commit();
  const auto& best = sweep.rows.at(sweep.argmin_upper);
  std::cout << "argmin m=" << best.m << " alpha=" << fmt(best.alpha)
            << " upper=" << fmt(best.bounds.upper)
            << " lower(alpha=0)=" << fmt(sweep.rows.front().bounds.lower) << '\n';
  return kExitOk;
}

struct Prepared {
  ExperimentConfig cfg;
  json plan;
};

Prepared prepare(const std::string& command, const CommonArgs& args, bool ghost) {
  std::optional<fs::path> path;
  if (!args.config.empty()) path = args.config;
  Prepared p{load_config(path, args.overrides), {}};
  p.plan = plan_json(command, p.cfg, ghost);
  return p;
}

std::vector<CellSpec> cells(const ExperimentConfig& cfg, bool all_epsilons) {
  std::vector<CellSpec> out;
  for (double a : cfg.alphas) {
    const auto eps = all_epsilons ? cfg.epsilons : std::vector<double>{cfg.epsilons.front()};
    for (double e : eps) {
      for (auto s : cfg.seeds) out.push_back({a, e, s});
    }
  }
  return out;
}

std::size_t alpha_index(const ExperimentConfig& cfg, double alpha) {
  return static_cast<std::size_t>(
      std::find(cfg.alphas.begin(), cfg.alphas.end(), alpha) - cfg.alphas.begin());
}

int cmd_sgd_bound(const CommonArgs& args, bool ghost_priors) {
  const Prepared p = prepare("sgd-bound", args, ghost_priors);
  if (args.dry_run) {
    std::cout << p.plan.dump(2) << '\n';
    return kExitOk;
  }
  const ExperimentConfig& cfg = p.cfg;
  const DataBundle data = load_data(cfg.dataset, cfg.batch);
  if (ghost_priors && !data.ghost) throw DataError("ghost priors need a ghost pool");
  const auto grid = cells(cfg, true);
  std::vector<BoundExperimentResult> results(grid.size());
  fan_out(grid.size(), args.jobs, [&](std::size_t i) {
    results[i] = get_bound(data.train, ghost_priors ? &*data.ghost : nullptr,
                           data.test, cfg, grid[i]);
  });

  Table table(schema::kBoundSweep);
  std::vector<std::vector<double>> by_alpha(cfg.alphas.size());
  for (const auto& r : results) {
    table.add_row({r.cell.alpha, static_cast<long long>(r.cell.seed), r.cell.epsilon,
                   r.sigma_p_selected, static_cast<long long>(r.t_selected), r.kl,
                   r.gibbs_risk.mean, r.bound_report.final_bound, r.test_error});
    by_alpha[alpha_index(cfg, r.cell.alpha)].push_back(r.bound_report.final_bound);
  }
  OutputDir out(output_dir(args.out, "sgd-bound"));
  write_csv(out.file("bound_sweep.csv"), table);
  write_json(out.file("manifest.json"),
             manifest_json("sgd-bound", cfg, p.plan, {"bound_sweep.csv"}));
  out.commit();
  print_alpha_summary(cfg.alphas, by_alpha, "bound");
  return kExitOk;
}

int cmd_direct_opt(const CommonArgs& args) {
  const Prepared p = prepare("direct-opt", args, false);
  if (args.dry_run) {
    std::cout << p.plan.dump(2) << '\n';
    return kExitOk;
  }
  const ExperimentConfig& cfg = p.cfg;
  const DataBundle data = load_data(cfg.dataset, cfg.batch);
  const auto grid = cells(cfg, false);
  std::vector<BoundOptResult> results(grid.size());
  fan_out(grid.size(), args.jobs, [&](std::size_t i) {
    results[i] = bound_opt(data.train, data.test, cfg, grid[i], cfg.bound_opt_steps);
  });

  Table table(schema::kDirectOpt);
  std::vector<std::vector<double>> by_alpha(cfg.alphas.size());
  for (const auto& o : results) {
    const auto& r = o.result;
    const double fb = r.bound_report.final_bound;
    if (o.trace.empty()) {
      table.add_row({r.cell.alpha, static_cast<long long>(r.cell.seed), 0LL,
                     fb, fb, r.test_error});
    }
    for (const auto& pt : o.trace) {
      table.add_row({r.cell.alpha, static_cast<long long>(r.cell.seed),
                     static_cast<long long>(pt.step), pt.surrogate, fb, r.test_error});
    }
    by_alpha[alpha_index(cfg, r.cell.alpha)].push_back(fb);
  }
  OutputDir out(output_dir(args.out, "direct-opt"));
  write_csv(out.file("direct_opt.csv"), table);
  write_json(out.file("manifest.json"),
             manifest_json("direct-opt", cfg, p.plan, {"direct_opt.csv"}));
  out.commit();
  print_alpha_summary(cfg.alphas, by_alpha, "bound");
  return kExitOk;
}

int cmd_oracle_variance(const CommonArgs& args) {
  const Prepared p = prepare("oracle-variance", args, false);
  if (args.dry_run) {
    std::cout << p.plan.dump(2) << '\n';
    return kExitOk;
  }
  const ExperimentConfig& cfg = p.cfg;
  const DataBundle data = load_data(cfg.dataset, cfg.batch);
  const auto grid = cells(cfg, false);
  std::vector<OracleVarianceRow> rows(grid.size());
  fan_out(grid.size(), args.jobs, [&](std::size_t i) {
    rows[i] = oracle_variance_study(data.train, data.test, cfg, grid[i]);
  });

  Table table(schema::kOracleVariance);
  std::vector<std::vector<double>> by_alpha(cfg.alphas.size());
  for (const auto& r : rows) {
    table.add_row({r.alpha, static_cast<long long>(r.seed), r.sigma_p, r.isotropic_kl,
                   r.oracle_kl, r.isotropic_bound, r.oracle_bound});
    by_alpha[alpha_index(cfg, r.alpha)].push_back(r.oracle_bound);
  }
  OutputDir out(output_dir(args.out, "oracle-variance"));
  write_csv(out.file("oracle_variance.csv"), table);
  write_json(out.file("manifest.json"),
             manifest_json("oracle-variance", cfg, p.plan, {"oracle_variance.csv"}));
  out.commit();
  print_alpha_summary(cfg.alphas, by_alpha, "oracle bound");
  return kExitOk;
}

int cmd_l2_sweep(const CommonArgs& args) {
  const Prepared p = prepare("l2-sweep", args, true);
  if (args.dry_run) {
    std::cout << p.plan.dump(2) << '\n';
    return kExitOk;
  }
  const ExperimentConfig& cfg = p.cfg;
  const DataBundle data = load_data(cfg.dataset, cfg.batch);
  if (!data.ghost) throw DataError("l2-sweep needs a ghost pool (dataset.n_ghost > 0)");
  const auto grid = cells(cfg, false);
  std::vector<L2Row> rows(grid.size());
  fan_out(grid.size(), args.jobs, [&](std::size_t i) {
    rows[i] = l2_sweep(data.train, *data.ghost, cfg, grid[i]);
  });

  Table table(schema::kL2Sweep);
  Table scatter(schema::kScatter);
  std::vector<std::vector<double>> gaps(cfg.alphas.size());
  for (const auto& r : rows) {
    table.add_row({r.alpha, static_cast<long long>(r.seed), r.d_prefix, r.d_ghost});
    gaps[alpha_index(cfg, r.alpha)].push_back(std::abs(r.d_prefix - r.d_ghost));
    for (std::size_t k = 0; k < r.scatter_base.size(); ++k) {
      scatter.add_row({r.alpha, static_cast<long long>(r.seed),
                       static_cast<long long>(k), r.scatter_base[k],
                       r.scatter_prefix[k]});
    }
  }
  OutputDir out(output_dir(args.out, "l2-sweep"));
  std::vector<std::string> outputs{"l2_sweep.csv"};
  write_csv(out.file("l2_sweep.csv"), table);
  if (cfg.scatter_params > 0) {
    write_csv(out.file("scatter.csv"), scatter);
    outputs.push_back("scatter.csv");
  }
  write_json(out.file("manifest.json"), manifest_json("l2-sweep", cfg, p.plan, outputs));
  out.commit();
  print_alpha_summary(cfg.alphas, gaps, "gap");
  return kExitOk;
}

void add_common(CLI::App* sub, CommonArgs& args) {
  sub->add_option("--config", args.config, "experiment config (JSON)");
  sub->add_option("--out", args.out,
                  "output directory (default $DDPB_OUTPUT_ROOT/<command>)");
  sub->add_option("--set", args.overrides, "override a config key, key=value");
  sub->add_flag("--dry-run", args.dry_run, "print grids and delta accounting only");
  sub->add_option("--jobs", args.jobs, "parallel experiment cells")
      ->check(CLI::PositiveNumber);
}

}  // namespace

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return kExitConfig;
  if (dynamic_cast<const DataError*>(&e)) return kExitData;
  if (dynamic_cast<const NumericError*>(&e)) return kExitNumeric;
  if (dynamic_cast<const std::invalid_argument*>(&e)) return kExitConfig;
  if (dynamic_cast<const fs::filesystem_error*>(&e)) return kExitData;
  return kExitNumeric;
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Data-dependent PAC-Bayes priors: bounds, toy model, SGD pipeline"};
  app.require_subcommand(1);

  std::string preset = "calibrated";
  std::size_t trials = 10000;
  double step = 0.01;
  std::string toy_out;
  auto* toy = app.add_subcommand("toy-fig1", "toy-model bounds versus alpha");
  toy->add_option("--preset", preset, "paper-literal or calibrated");
  toy->add_option("--trials", trials, "Monte-Carlo KL draws per alpha (0 skips)");
  toy->add_option("--alpha-step", step, "alpha grid spacing")
      ->check(CLI::Range(1e-6, 1.0));
  toy->add_option("--out", toy_out, "output directory");

  double q = 0.0;
  double b = 0.0;
  int precision = 6;
  auto* inv = app.add_subcommand("invert-kl", "largest p with kl(q||p) <= b");
  inv->add_option("--q", q, "empirical risk")->required();
  inv->add_option("--b", b, "divergence budget")->required();
  inv->add_option("--precision", precision, "significant digits");

  CommonArgs sgd_args, opt_args, oracle_args, l2_args;
  bool ghost = false;
  auto* sgd = app.add_subcommand("sgd-bound", "certificates for SGD-trained networks");
  add_common(sgd, sgd_args);
  sgd->add_flag("--ghost", ghost, "center priors on ghost-data runs");
  auto* opt = app.add_subcommand("direct-opt", "direct bound minimization");
  add_common(opt, opt_args);
  auto* oracle =
      app.add_subcommand("oracle-variance", "isotropic versus oracle-variance bounds");
  add_common(oracle, oracle_args);
  auto* l2 = app.add_subcommand("l2-sweep", "prefix and ghost distances to w_S");
  add_common(l2, l2_args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*toy) return cmd_toy_fig1(preset, trials, step, toy_out);
    if (*inv) {
      std::cout << fmt(kl_inverse(q, b), precision) << '\n';
      return kExitOk;
    }
    if (*sgd) return cmd_sgd_bound(sgd_args, ghost);
    if (*opt) return cmd_direct_opt(opt_args);
    if (*oracle) return cmd_oracle_variance(oracle_args);
    if (*l2) return cmd_l2_sweep(l2_args);
  } catch (const std::exception& e) {
    const int rc = exit_code_for(e);
    const char* kind = rc == kExitConfig ? "config" : rc == kExitData ? "data" : "numeric";
    std::cerr << kind << " error: " << e.what() << '\n';
    return rc;
  }
  return kExitOk;
}

}  // namespace ddpb
