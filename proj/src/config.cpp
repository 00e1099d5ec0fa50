#include "nfcs/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <initializer_list>
#include <set>

namespace nfcs {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

void only_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : obj.items()) {
    if (!ok.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read(const json& obj, const char* key, T& out, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

void read_range(const json& obj, const char* key, double& lo, double& hi, const std::string& where) {
  if (!obj.contains(key)) return;
  std::vector<double> v;
  read(obj, key, v, where);
  if (v.size() != 2) throw ConfigError(where + "." + key + " must be [min, max]");
  lo = v[0];
  hi = v[1];
}

const char* channel_name(ChannelKind k) { return k == ChannelKind::kExact ? "exact" : "fresnel"; }

ChannelKind parse_channel(const std::string& s) {
  if (s == "exact") return ChannelKind::kExact;
  if (s == "fresnel") return ChannelKind::kFresnel;
  throw ConfigError("unknown channel model '" + s + "'");
}

const char* kTrainOverrideKeys[] = {"learning_rate", "batch_size", "max_epochs", "patience", "lr_schedule"};

ordered_json override_json(const TrainOverride& o) {
  ordered_json j = ordered_json::object();
  if (o.learning_rate) j["learning_rate"] = *o.learning_rate;
  if (o.batch_size) j["batch_size"] = *o.batch_size;
  if (o.max_epochs) j["max_epochs"] = *o.max_epochs;
  if (o.patience) j["patience"] = *o.patience;
  if (o.schedule) j["lr_schedule"] = to_string(*o.schedule);
  return j;
}

template <typename T>
void read_opt(const json& obj, const char* key, std::optional<T>& out, const std::string& where) {
  if (!obj.contains(key)) return;
  T v{};
  read(obj, key, v, where);
  out = v;
}

TrainOverride override_from_json(const json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(std::begin(kTrainOverrideKeys), std::end(kTrainOverrideKeys), key) == std::end(kTrainOverrideKeys)) {
      throw ConfigError("unknown key '" + key + "' in " + where);
    }
  }
  TrainOverride o;
  read_opt(j, "learning_rate", o.learning_rate, where);
  read_opt(j, "batch_size", o.batch_size, where);
  read_opt(j, "max_epochs", o.max_epochs, where);
  read_opt(j, "patience", o.patience, where);
  if (j.contains("lr_schedule")) {
    std::string name;
    read(j, "lr_schedule", name, where);
    o.schedule = parse_lr_schedule(name);
  }
  return o;
}

void validate_train(const TrainConfig& t, const std::string& where) {
  if (!(t.adam.learning_rate > 0.0)) throw ConfigError(where + ": learning_rate must be positive");
  if (!(t.adam.beta1 >= 0.0 && t.adam.beta1 < 1.0) || !(t.adam.beta2 >= 0.0 && t.adam.beta2 < 1.0)) {
    throw ConfigError(where + ": adam betas must lie in [0, 1)");
  }
  if (!(t.adam.epsilon > 0.0)) throw ConfigError(where + ": adam epsilon must be positive");
  if (t.batch_size < 1) throw ConfigError(where + ": batch_size must be >= 1");
  if (t.max_epochs < 0) throw ConfigError(where + ": max_epochs must be >= 0");
  if (t.patience < 0) throw ConfigError(where + ": patience must be >= 0");
}

}  // namespace

void TrainOverride::apply(TrainConfig& t) const {
  if (learning_rate) t.adam.learning_rate = *learning_rate;
  if (batch_size) t.batch_size = *batch_size;
  if (max_epochs) t.max_epochs = *max_epochs;
  if (patience) t.patience = *patience;
  if (schedule) t.schedule = *schedule;
}

TrainConfig ExperimentConfig::train_for(ModelKind kind) const {
  TrainConfig t = train;
  (kind == ModelKind::kLista ? train_lista : train_sdl_lista).apply(t);
  return t;
}

ExperimentConfig ExperimentConfig::preset(const std::string& name) {
  ExperimentConfig cfg;
  cfg.omp_solver.iters = 10;
  cfg.train.adam.learning_rate = 1e-4;
  cfg.train.batch_size = 256;
  cfg.train.max_epochs = 200;
  cfg.train.patience = 10;
  if (name == "paper") return cfg;
  if (name == "desk") {
    cfg.n_antennas = 64;
    cfg.n_rf = 16;
    cfg.grid.g_angle = 128;
    cfg.grid.g_dist = 4;
    cfg.layers = 6;
    cfg.sdl_atoms = 128;
    cfg.train_size = 20000;
    cfg.test_size = 256;
    cfg.train.max_epochs = 150;
    cfg.train.adam.learning_rate = 1e-4;
    // SDL-LISTA has two orders of magnitude fewer weights than LISTA and
    // does not overfit 20000 samples; it wants a larger decayed rate and
    // the whole epoch budget.
    cfg.train_sdl_lista.learning_rate = 3e-3;
    cfg.train_sdl_lista.schedule = LrSchedule::kCosine;
    cfg.train_sdl_lista.patience = 0;
    cfg.sweep_layers = {2, 4, 6, 8};
    return cfg;
  }
  throw ConfigError("unknown preset '" + name + "' (paper, desk)");
}

ArrayConfig ExperimentConfig::array() const { return ArrayConfig::make(n_antennas, carrier_freq, spacing); }

DataGenConfig ExperimentConfig::data_gen() const {
  DataGenConfig d;
  d.array = array();
  d.prior = prior;
  d.grid = grid;
  d.channel = channel;
  d.snr_min_db = snr_min_db;
  d.snr_max_db = snr_max_db;
  d.on_grid = on_grid;
  return d;
}

ModelDims ExperimentConfig::dims(ModelKind kind) const {
  ModelDims d;
  d.n_antennas = n_antennas;
  d.n_rf = n_rf;
  d.atoms = kind == ModelKind::kLista ? grid.size() : sdl_atoms;
  d.layers = layers;
  return d;
}

MethodSpec ExperimentConfig::method(Method m) const {
  MethodSpec spec;
  spec.method = m;
  if (m == Method::kOmp) spec.solver = omp_solver;
  if (m == Method::kFista) spec.solver = fista_solver;
  if (m == Method::kIsta) spec.solver = ista_solver;
  return spec;
}

void ExperimentConfig::validate() const {
  const ArrayConfig arr = array();
  arr.validate();
  prior.validate();
  grid.validate();
  if (n_rf < 1 || n_rf >= n_antennas) {
    throw ConfigError("n_rf must satisfy 1 <= n_rf < n_antennas (got " + std::to_string(n_rf) + ")");
  }
  if (prior.q_max > n_antennas) throw ConfigError("more paths than antennas");
  if (!(snr_min_db <= snr_max_db)) throw ConfigError("snr range must be [min, max] with min <= max");
  if (test_size == 0) throw ConfigError("test_size must be positive");
  if (layers < 1) throw ConfigError("model.layers must be >= 1");
  if (sdl_atoms < 1) throw ConfigError("model.sdl_atoms must be >= 1");
  validate_train(train_for(ModelKind::kLista), "train (lista)");
  validate_train(train_for(ModelKind::kSdlLista), "train (sdl-lista)");
  if (bench_methods.empty()) throw ConfigError("bench.methods is empty");
  if (bench_snr_db.empty()) throw ConfigError("bench.snr_db is empty");
  if (bench_test_size == 0) throw ConfigError("bench.test_size must be positive");
  for (Method m : {Method::kOmp, Method::kFista, Method::kIsta}) {
    const SolverConfig s = method(m).solver;
    if (s.iters < 1) throw ConfigError(std::string(to_string(m)) + ".iters must be >= 1");
    if (s.xi && !(*s.xi >= 0.0)) throw ConfigError("xi must be >= 0");
    if (!(s.xi_rel >= 0.0)) throw ConfigError("xi_rel must be >= 0");
    if (s.residual_tol && !(*s.residual_tol >= 0.0)) throw ConfigError("residual_tol must be >= 0");
  }
  for (int l : sweep_layers) {
    if (l < 1) throw ConfigError("sweep.layers entries must be >= 1");
  }
  if (coherence.q_min < 1 || coherence.q_max < coherence.q_min) throw ConfigError("bad coherence Q range");
}

ordered_json to_json(const ExperimentConfig& c) {
  ordered_json j;
  j["seed"] = c.seed;
  j["array"] = {{"n_antennas", c.n_antennas}, {"carrier_freq_hz", c.carrier_freq}, {"spacing_m", c.spacing}};
  j["n_rf"] = c.n_rf;
  j["channel"] = channel_name(c.channel);
  j["prior"] = {{"gmm_means", c.prior.gmm_means},
                {"gmm_variance", c.prior.gmm_variance},
                {"mu_range_m", {c.prior.mu_min, c.prior.mu_max}},
                {"d_range_m", {c.prior.d_min, c.prior.d_max}},
                {"paths_range", {c.prior.q_min, c.prior.q_max}},
                {"include_direct_path", c.prior.include_direct_path},
                {"scatter_rho", c.prior.scatter_rho}};
  j["grid"] = {{"g_angle", c.grid.g_angle}, {"g_dist", c.grid.g_dist}, {"invdist_max", c.grid.invdist_max}};
  j["data"] = {{"train_size", c.train_size},
               {"test_size", c.test_size},
               {"snr_range_db", {c.snr_min_db, c.snr_max_db}},
               {"on_grid", c.on_grid}};
  j["model"] = {{"layers", c.layers}, {"sdl_atoms", c.sdl_atoms}, {"init", to_string(c.train.init)}};
  j["train"] = {{"learning_rate", c.train.adam.learning_rate},
                {"batch_size", c.train.batch_size},
                {"max_epochs", c.train.max_epochs},
                {"patience", c.train.patience},
                {"lr_schedule", to_string(c.train.schedule)},
                {"adam_beta1", c.train.adam.beta1},
                {"adam_beta2", c.train.adam.beta2},
                {"adam_epsilon", c.train.adam.epsilon}};
  if (!c.train_lista.empty()) j["train"]["lista"] = override_json(c.train_lista);
  if (!c.train_sdl_lista.empty()) j["train"]["sdl_lista"] = override_json(c.train_sdl_lista);
  ordered_json bench;
  std::vector<std::string> names;
  for (Method m : c.bench_methods) names.emplace_back(to_string(m));
  bench["methods"] = names;
  bench["snr_db"] = c.bench_snr_db;
  bench["test_size"] = c.bench_test_size;
  for (Method m : {Method::kOmp, Method::kFista, Method::kIsta}) {
    const MethodSpec spec = c.method(m);
    ordered_json s;
    s["iters"] = spec.solver.iters;
    if (m == Method::kOmp) {
      s["residual_tol"] = spec.solver.residual_tol ? ordered_json(*spec.solver.residual_tol) : ordered_json(nullptr);
    } else {
      s["xi"] = spec.solver.xi ? ordered_json(*spec.solver.xi) : ordered_json(nullptr);
      s["xi_rel"] = spec.solver.xi_rel;
    }
    bench[to_string(m)] = s;
  }
  j["bench"] = bench;
  j["sweep"] = {{"layers", c.sweep_layers}, {"seeds", c.sweep_seeds}};
  j["coherence"] = {{"pair_budget", c.coherence.pair_budget},
                    {"paths_range", {c.coherence.q_min, c.coherence.q_max}}};
  j["output"] = {{"record_timing", c.record_timing}};
  return j;
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c = ExperimentConfig::preset("paper");
  only_keys(j, "config",
            {"seed", "array", "n_rf", "channel", "prior", "grid", "data", "model", "train", "bench", "sweep",
             "coherence", "output"});
  read(j, "seed", c.seed, "config");
  read(j, "n_rf", c.n_rf, "config");
  if (j.contains("channel")) {
    std::string ch;
    read(j, "channel", ch, "config");
    c.channel = parse_channel(ch);
  }
  if (j.contains("array")) {
    const json& a = j.at("array");
    only_keys(a, "array", {"n_antennas", "carrier_freq_hz", "spacing_m"});
    read(a, "n_antennas", c.n_antennas, "array");
    read(a, "carrier_freq_hz", c.carrier_freq, "array");
    read(a, "spacing_m", c.spacing, "array");
  }
  if (j.contains("prior")) {
    const json& p = j.at("prior");
    only_keys(p, "prior",
              {"gmm_means", "gmm_variance", "mu_range_m", "d_range_m", "paths_range", "include_direct_path",
               "scatter_rho"});
    read(p, "gmm_means", c.prior.gmm_means, "prior");
    read(p, "gmm_variance", c.prior.gmm_variance, "prior");
    read_range(p, "mu_range_m", c.prior.mu_min, c.prior.mu_max, "prior");
    read_range(p, "d_range_m", c.prior.d_min, c.prior.d_max, "prior");
    if (p.contains("paths_range")) {
      std::vector<int> q;
      read(p, "paths_range", q, "prior");
      if (q.size() != 2) throw ConfigError("prior.paths_range must be [min, max]");
      c.prior.q_min = q[0];
      c.prior.q_max = q[1];
    }
    read(p, "include_direct_path", c.prior.include_direct_path, "prior");
    read(p, "scatter_rho", c.prior.scatter_rho, "prior");
  }
  if (j.contains("grid")) {
    const json& g = j.at("grid");
    only_keys(g, "grid", {"g_angle", "g_dist", "invdist_max"});
    read(g, "g_angle", c.grid.g_angle, "grid");
    read(g, "g_dist", c.grid.g_dist, "grid");
    read(g, "invdist_max", c.grid.invdist_max, "grid");
  }
  if (j.contains("data")) {
    const json& d = j.at("data");
    only_keys(d, "data", {"train_size", "test_size", "snr_range_db", "on_grid"});
    read(d, "train_size", c.train_size, "data");
    read(d, "test_size", c.test_size, "data");
    read_range(d, "snr_range_db", c.snr_min_db, c.snr_max_db, "data");
    read(d, "on_grid", c.on_grid, "data");
  }
  if (j.contains("model")) {
    const json& m = j.at("model");
    only_keys(m, "model", {"layers", "sdl_atoms", "init"});
    read(m, "layers", c.layers, "model");
    read(m, "sdl_atoms", c.sdl_atoms, "model");
    if (m.contains("init")) {
      std::string s;
      read(m, "init", s, "model");
      c.train.init = parse_init_scheme(s);
    }
  }
  if (j.contains("train")) {
    const json& t = j.at("train");
    only_keys(t, "train",
              {"learning_rate", "batch_size", "max_epochs", "patience", "lr_schedule", "adam_beta1", "adam_beta2",
               "adam_epsilon", "lista", "sdl_lista"});
    read(t, "learning_rate", c.train.adam.learning_rate, "train");
    read(t, "batch_size", c.train.batch_size, "train");
    read(t, "max_epochs", c.train.max_epochs, "train");
    read(t, "patience", c.train.patience, "train");
    if (t.contains("lr_schedule")) {
      std::string s;
      read(t, "lr_schedule", s, "train");
      c.train.schedule = parse_lr_schedule(s);
    }
    read(t, "adam_beta1", c.train.adam.beta1, "train");
    read(t, "adam_beta2", c.train.adam.beta2, "train");
    read(t, "adam_epsilon", c.train.adam.epsilon, "train");
    if (t.contains("lista")) c.train_lista = override_from_json(t.at("lista"), "train.lista");
    if (t.contains("sdl_lista")) c.train_sdl_lista = override_from_json(t.at("sdl_lista"), "train.sdl_lista");
  }
  if (j.contains("bench")) {
    const json& b = j.at("bench");
    only_keys(b, "bench", {"methods", "snr_db", "test_size", "omp", "fista", "ista"});
    for (Method m : {Method::kOmp, Method::kFista, Method::kIsta}) {
      const char* key = to_string(m);
      if (!b.contains(key)) continue;
      SolverConfig& solver = m == Method::kOmp ? c.omp_solver : m == Method::kFista ? c.fista_solver : c.ista_solver;
      const json& s = b.at(key);
      const std::string where = std::string("bench.") + key;
      if (m == Method::kOmp) {
        only_keys(s, where, {"iters", "residual_tol"});
        solver.residual_tol.reset();
        if (s.contains("residual_tol") && !s.at("residual_tol").is_null()) {
          double tol = 0.0;
          read(s, "residual_tol", tol, where);
          solver.residual_tol = tol;
        }
      } else {
        only_keys(s, where, {"iters", "xi", "xi_rel"});
        solver.xi.reset();
        if (s.contains("xi") && !s.at("xi").is_null()) {
          double xi = 0.0;
          read(s, "xi", xi, where);
          solver.xi = xi;
        }
        read(s, "xi_rel", solver.xi_rel, where);
      }
      read(s, "iters", solver.iters, where);
    }
    if (b.contains("methods")) {
      std::vector<std::string> names;
      read(b, "methods", names, "bench");
      c.bench_methods.clear();
      for (const auto& name : names) c.bench_methods.push_back(parse_method(name));
    }
    read(b, "snr_db", c.bench_snr_db, "bench");
    read(b, "test_size", c.bench_test_size, "bench");
  }
  if (j.contains("sweep")) {
    const json& s = j.at("sweep");
    only_keys(s, "sweep", {"layers", "seeds"});
    read(s, "layers", c.sweep_layers, "sweep");
    read(s, "seeds", c.sweep_seeds, "sweep");
  }
  if (j.contains("coherence")) {
    const json& s = j.at("coherence");
    only_keys(s, "coherence", {"pair_budget", "paths_range"});
    read(s, "pair_budget", c.coherence.pair_budget, "coherence");
    if (s.contains("paths_range")) {
      std::vector<int> q;
      read(s, "paths_range", q, "coherence");
      if (q.size() != 2) throw ConfigError("coherence.paths_range must be [min, max]");
      c.coherence.q_min = q[0];
      c.coherence.q_max = q[1];
    }
  }
  if (j.contains("output")) {
    const json& o = j.at("output");
    only_keys(o, "output", {"record_timing"});
    read(o, "record_timing", c.record_timing, "output");
  }
  c.coherence.seed = c.seed;
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MissingArtifact("cannot open config " + path);
  json j;
  try {
    j = json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  ExperimentConfig cfg = config_from_json(j);
  if (const char* env = std::getenv("NFCS_SEED"); env != nullptr && *env != '\0') {
    try {
      std::size_t used = 0;
      cfg.seed = std::stoull(env, &used);
      if (used != std::string(env).size()) throw std::invalid_argument(env);
    } catch (const std::exception&) {
      throw ConfigError(std::string("NFCS_SEED is not an unsigned integer: ") + env);
    }
    cfg.coherence.seed = cfg.seed;
  }
  cfg.validate();
  return cfg;
}

void save_config(const ExperimentConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw MissingArtifact("cannot write " + path);
  out << to_json(cfg).dump(2) << "\n";
}

BenchmarkFixtures build_fixtures(const ExperimentConfig& cfg) {
  BenchmarkFixtures fx;
  fx.data = cfg.data_gen();
  Rng rng(cfg.combiner_seed());
  fx.combiner = std::make_shared<CombinerMatrix>(sample_combiner(fx.data.array, cfg.n_rf, rng));
  fx.dictionary = std::make_shared<Dictionary>(build_spatial_dictionary(fx.data.array, cfg.grid));
  return fx;
}

}  // namespace nfcs
