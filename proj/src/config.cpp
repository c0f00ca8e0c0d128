#include "ddpb/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "ddpb/error.hpp"
#include "ddpb/results.hpp"
#include "ddpb/rng.hpp"

namespace ddpb {

using nlohmann::json;

namespace {

template <typename T>
void read_field(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config field '") + key + "': " + e.what());
  }
}

void reject_unknown(const json& j, const std::set<std::string>& known,
                    const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) {
      throw ConfigError("unknown config key '" + where + key + "'");
    }
  }
}

json dataset_to_json(const DatasetRef& d) {
  return json{{"kind", d.kind},
              {"generator", d.generator},
              {"n", d.n},
              {"n_test", d.n_test},
              {"n_ghost", d.n_ghost},
              {"dim", d.dim},
              {"separation", d.separation},
              {"seed", d.seed},
              {"train_images", d.train_images},
              {"train_labels", d.train_labels},
              {"test_images", d.test_images},
              {"test_labels", d.test_labels}};
}

DatasetRef dataset_from_json(const json& j) {
  DatasetRef d;
  reject_unknown(j, {"kind", "generator", "n", "n_test", "n_ghost", "dim",
                     "separation", "seed", "train_images", "train_labels",
                     "test_images", "test_labels"},
                 "dataset.");
  read_field(j, "kind", d.kind);
  read_field(j, "generator", d.generator);
  read_field(j, "n", d.n);
  read_field(j, "n_test", d.n_test);
  read_field(j, "n_ghost", d.n_ghost);
  read_field(j, "dim", d.dim);
  read_field(j, "separation", d.separation);
  read_field(j, "seed", d.seed);
  read_field(j, "train_images", d.train_images);
  read_field(j, "train_labels", d.train_labels);
  read_field(j, "test_images", d.test_images);
  read_field(j, "test_labels", d.test_labels);
  return d;
}

template <typename T>
void require_nonempty(const std::vector<T>& v, const char* name) {
  if (v.empty()) throw ConfigError(std::string(name) + " must be nonempty");
}

}  // namespace

void ExperimentConfig::validate() const {
  if (dataset.kind != "synthetic" && dataset.kind != "idx") {
    throw ConfigError("dataset.kind must be 'synthetic' or 'idx'");
  }
  if (dataset.kind == "synthetic" && dataset.generator != "gaussian_pair") {
    throw ConfigError("unknown generator: " + dataset.generator);
  }
  if (dataset.n == 0 || dataset.n_test == 0) {
    throw ConfigError("dataset sizes must be positive");
  }
  if (layer_sizes.size() < 2) throw ConfigError("layer_sizes needs >= 2 entries");
  for (int s : layer_sizes) {
    if (s <= 0) throw ConfigError("layer sizes must be positive");
  }
  require_nonempty(alphas, "alphas");
  require_nonempty(sigma_p_grid, "sigma_p_grid");
  require_nonempty(prefix_t_multipliers, "prefix_t_multipliers");
  require_nonempty(ghost_t_epochs, "ghost_t_epochs");
  require_nonempty(epsilons, "epsilons");
  require_nonempty(bound_opt_sigma_p_grid, "bound_opt_sigma_p_grid");
  require_nonempty(seeds, "seeds");
  for (double a : alphas) {
    if (!(a >= 0.0 && a < 1.0)) throw ConfigError("alphas must lie in [0,1)");
  }
  for (const auto* grid : {&sigma_p_grid, &bound_opt_sigma_p_grid}) {
    for (double s : *grid) {
      if (!(s > 0.0)) throw ConfigError("prior variances must be > 0");
    }
  }
  for (double e : epsilons) {
    if (!(e >= 0.0 && e < 1.0)) throw ConfigError("epsilons must lie in [0,1)");
  }
  for (std::size_t t : prefix_t_multipliers) {
    if (t == 0) throw ConfigError("prefix_t_multipliers must be positive");
  }
  for (std::size_t t : ghost_t_epochs) {
    if (t == 0) throw ConfigError("ghost_t_epochs must be positive");
  }
  if (batch == 0) throw ConfigError("batch must be positive");
  if (!(learning_rate > 0.0) || !(bound_opt_learning_rate > 0.0) ||
      !(oracle_variance_learning_rate > 0.0)) {
    throw ConfigError("learning rates must be > 0");
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw ConfigError("momentum must lie in [0,1)");
  }
  if (max_epochs == 0) throw ConfigError("max_epochs must be positive");
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta must lie in (0,1)");
  if (!(delta_mc_fraction > 0.0 && delta_mc_fraction < 1.0)) {
    throw ConfigError("delta_mc_fraction must lie in (0,1)");
  }
  if (mc_samples == 0 || test_mc_samples == 0) {
    throw ConfigError("Monte-Carlo sample counts must be positive");
  }
  if (bound_opt_log_every == 0) throw ConfigError("bound_opt_log_every must be > 0");
  const std::size_t n = dataset.n - dataset.n % batch;
  for (double a : alphas) {
    const auto m = static_cast<std::size_t>(a * static_cast<double>(n) + 1e-9);
    if (m % batch != 0) {
      throw ConfigError("batch " + std::to_string(batch) +
                        " does not divide floor(alpha n) = " + std::to_string(m) +
                        " for alpha " + std::to_string(a));
    }
  }
}

std::vector<std::size_t> ExperimentConfig::prefix_t_grid(std::size_t m) const {
  std::vector<std::size_t> grid;
  for (std::size_t k : prefix_t_multipliers) grid.push_back(k * (m / batch));
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

std::vector<std::size_t> ExperimentConfig::ghost_t_grid(std::size_t n) const {
  std::vector<std::size_t> grid;
  for (std::size_t k : ghost_t_epochs) grid.push_back(k * (n / batch));
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

json to_json(const ExperimentConfig& c) {
  return json{{"dataset", dataset_to_json(c.dataset)},
              {"layer_sizes", c.layer_sizes},
              {"alphas", c.alphas},
              {"sigma_p_grid", c.sigma_p_grid},
              {"prefix_t_multipliers", c.prefix_t_multipliers},
              {"ghost_t_epochs", c.ghost_t_epochs},
              {"epsilons", c.epsilons},
              {"batch", c.batch},
              {"learning_rate", c.learning_rate},
              {"momentum", c.momentum},
              {"max_epochs", c.max_epochs},
              {"bound_opt_learning_rate", c.bound_opt_learning_rate},
              {"bound_opt_steps", c.bound_opt_steps},
              {"bound_opt_log_every", c.bound_opt_log_every},
              {"bound_opt_sigma_p_grid", c.bound_opt_sigma_p_grid},
              {"oracle_variance_learning_rate", c.oracle_variance_learning_rate},
              {"oracle_variance_steps", c.oracle_variance_steps},
              {"seeds", c.seeds},
              {"delta", c.delta},
              {"delta_mc_fraction", c.delta_mc_fraction},
              {"mc_samples", c.mc_samples},
              {"test_mc_samples", c.test_mc_samples},
              {"scatter_params", c.scatter_params}};
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  std::set<std::string> known;
  const json defaults = to_json(c);
  for (const auto& [key, _] : defaults.items()) known.insert(key);
  reject_unknown(j, known, "");
  if (j.contains("dataset")) c.dataset = dataset_from_json(j.at("dataset"));
  read_field(j, "layer_sizes", c.layer_sizes);
  read_field(j, "alphas", c.alphas);
  read_field(j, "sigma_p_grid", c.sigma_p_grid);
  read_field(j, "prefix_t_multipliers", c.prefix_t_multipliers);
  read_field(j, "ghost_t_epochs", c.ghost_t_epochs);
  read_field(j, "epsilons", c.epsilons);
  read_field(j, "batch", c.batch);
  read_field(j, "learning_rate", c.learning_rate);
  read_field(j, "momentum", c.momentum);
  read_field(j, "max_epochs", c.max_epochs);
  read_field(j, "bound_opt_learning_rate", c.bound_opt_learning_rate);
  read_field(j, "bound_opt_steps", c.bound_opt_steps);
  read_field(j, "bound_opt_log_every", c.bound_opt_log_every);
  read_field(j, "bound_opt_sigma_p_grid", c.bound_opt_sigma_p_grid);
  read_field(j, "oracle_variance_learning_rate", c.oracle_variance_learning_rate);
  read_field(j, "oracle_variance_steps", c.oracle_variance_steps);
  read_field(j, "seeds", c.seeds);
  read_field(j, "delta", c.delta);
  read_field(j, "delta_mc_fraction", c.delta_mc_fraction);
  read_field(j, "mc_samples", c.mc_samples);
  read_field(j, "test_mc_samples", c.test_mc_samples);
  read_field(j, "scatter_params", c.scatter_params);
  c.validate();
  return c;
}

json apply_overrides(json j, const std::vector<std::string>& overrides) {
  for (const auto& ov : overrides) {
    const auto eq = ov.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ConfigError("override must look like key=value: " + ov);
    }
    const std::string key = ov.substr(0, eq);
    const std::string raw = ov.substr(eq + 1);
    json value = json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;

    json* node = &j;
    std::size_t start = 0;
    while (true) {
      const auto dot = key.find('.', start);
      const std::string part = key.substr(start, dot - start);
      if (dot == std::string::npos) {
        (*node)[part] = value;
        break;
      }
      if (!node->contains(part)) (*node)[part] = json::object();
      node = &(*node)[part];
      start = dot + 1;
    }
  }
  return j;
}

ExperimentConfig load_config(const std::optional<std::filesystem::path>& path,
                             const std::vector<std::string>& overrides) {
  json j = json::object();
  if (path) {
    std::ifstream in(*path);
    if (!in) throw ConfigError("cannot open config file " + path->string());
    j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ConfigError("config is not valid JSON: " + path->string());
  }
  return config_from_json(apply_overrides(std::move(j), overrides));
}

std::string config_hash(const ExperimentConfig& cfg) {
  return fnv1a_hex(to_json(cfg).dump());
}

DataBundle load_data(const DatasetRef& ref, std::size_t batch) {
  DataBundle bundle;
  if (ref.kind == "synthetic") {
    GaussianPairSpec spec{ref.n, ref.dim, ref.separation, ref.seed};
    bundle.train = make_gaussian_pair(spec);
    spec.n = ref.n_test;
    spec.seed = derive_seed(ref.seed, "test");
    bundle.test = make_gaussian_pair(spec);
    if (ref.n_ghost > 0) {
      spec.n = ref.n_ghost;
      spec.seed = derive_seed(ref.seed, "ghost");
      bundle.ghost = make_gaussian_pair(spec);
    }
  } else {
    const Dataset train = load_idx(ref.train_images, ref.train_labels);
    const Dataset test = load_idx(ref.test_images, ref.test_labels);
    if (train.size() < ref.n) {
      throw DataError("IDX training set has fewer than n rows");
    }
    bundle.train = train.slice(0, ref.n);
    bundle.test = test.slice(0, std::min(ref.n_test, test.size()));
    if (ref.n_ghost > 0) {
      if (train.size() < ref.n + ref.n_ghost) {
        throw DataError("IDX training set too small for the ghost pool");
      }
      bundle.ghost = train.slice(ref.n, ref.n + ref.n_ghost);
    }
  }
  bundle.train = bundle.train.truncated_to_multiple(batch);
  return bundle;
}

}  // namespace ddpb
