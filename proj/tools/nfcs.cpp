#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "nfcs/config.hpp"
#include "nfcs/parallel.hpp"

namespace fs = std::filesystem;
using namespace nfcs;

namespace {

struct Options {
  int threads = 1;
  bool no_timing = false;
  bool quiet = false;

  std::string preset = "desk";
  std::string config;
  std::string output;

  bool identity = false;

  std::string kind;
  std::string split = "train";

  std::string model;
  std::string data;
  std::string test_data;
  std::string history;
  int epochs = -1;

  std::string methods;
  std::string ckpt_dir = ".";

  std::string layers;
  std::string seeds;
};

ExperimentConfig load(const Options& o) {
  ExperimentConfig cfg = load_config(o.config);
  if (o.no_timing) cfg.record_timing = false;
  return cfg;
}

std::ofstream open_out(const std::string& path) {
  if (const fs::path parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw MissingArtifact("cannot write " + path);
  return out;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename T>
std::vector<T> parse_numbers(const std::string& text, const char* what) {
  std::vector<T> out;
  for (const auto& item : split_list(text)) {
    std::istringstream is(item);
    T v{};
    if (!(is >> v) || !is.eof()) throw ConfigError(std::string("bad ") + what + " entry '" + item + "'");
    out.push_back(v);
  }
  return out;
}

std::string checkpoint_path(const std::string& dir, Method m) {
  return (fs::path(dir) / (std::string(to_string(m)) + ".ckpt")).string();
}

std::string fmt(double v, int digits = 3) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

int cmd_init_config(const Options& o) {
  const ExperimentConfig cfg = ExperimentConfig::preset(o.preset);
  cfg.validate();
  save_config(cfg, o.output);
  std::cout << "wrote " << o.preset << " config to " << o.output << "\n";
  return 0;
}

int cmd_coherence(const Options& o) {
  const ExperimentConfig cfg = load(o);
  const ArrayConfig arr = cfg.array();
  CMat w;
  if (o.identity) {
    w = CMat::Identity(arr.n_antennas, arr.n_antennas);
  } else {
    w = build_fixtures(cfg).combiner->w;
  }
  const CoherenceReport rep = coherence_report(arr, cfg.grid, w, cfg.coherence);
  std::cout << "combiner: " << (o.identity ? "identity" : "random phase") << "\n";
  std::cout << "worst adjacent coherence: " << fmt(rep.worst_adjacent.coherence, 6) << " ("
            << rep.worst_adjacent.pair_type << " pair " << rep.worst_adjacent.g1 << "," << rep.worst_adjacent.g2
            << ")\n";
  std::cout << "global coherence: " << fmt(rep.global.coherence, 6) << " over " << rep.global_pairs_scanned
            << " pairs\n";
  for (const auto& t : rep.thresholds) {
    std::cout << "Q=" << t.q << " threshold 1/(2Q-1)=" << fmt(t.threshold, 6)
              << " adjacent " << (t.adjacent_violates ? "VIOLATES" : "ok") << ", global "
              << (t.global_violates ? "VIOLATES" : "ok") << "\n";
  }
  if (!o.output.empty()) {
    std::ofstream out = open_out(o.output);
    rep.write_csv(out);
  }
  return 0;
}

int cmd_gen_data(const Options& o) {
  const ExperimentConfig cfg = load(o);
  const BenchmarkFixtures fx = build_fixtures(cfg);
  const DatasetKind kind = o.kind == "lista" ? DatasetKind::kLista : DatasetKind::kSdl;
  const bool train_split = o.split == "train";
  const std::size_t size = train_split ? cfg.train_size : cfg.test_size;
  const std::uint64_t seed = train_split ? cfg.train_data_seed() : cfg.test_data_seed();
  const Dataset data = make_dataset(kind, size, fx.data, fx.combiner, fx.dictionary, seed, o.threads);
  if (const fs::path parent = fs::path(o.output).parent_path(); !parent.empty()) fs::create_directories(parent);
  save_dataset(data, o.output);
  std::cout << "wrote " << data.size() << " " << to_string(kind) << " samples (" << o.split << ") to " << o.output
            << "\n";
  return 0;
}

int cmd_train(const Options& o) {
  const ExperimentConfig cfg = load(o);
  const ModelKind kind = parse_model_kind(o.model);
  TrainConfig tc = cfg.train_for(kind);
  if (o.epochs >= 0) tc.max_epochs = o.epochs;
  const BenchmarkFixtures fx = build_fixtures(cfg);

  Dataset train_set = o.data.empty()
                          ? make_dataset(dataset_kind_for(kind), cfg.train_size, fx.data, fx.combiner,
                                         fx.dictionary, cfg.train_data_seed(), o.threads)
                          : load_dataset(o.data, fx.combiner, fx.dictionary);
  if (train_set.kind != dataset_kind_for(kind)) {
    throw ConfigError(std::string("--data holds a ") + to_string(train_set.kind) + " dataset but the model is " +
                      to_string(kind));
  }
  const Dataset test_set = o.test_data.empty()
                               ? make_dataset(DatasetKind::kSdl, cfg.test_size, fx.data, fx.combiner,
                                              fx.dictionary, cfg.test_data_seed(), o.threads)
                               : load_dataset(o.test_data, fx.combiner, fx.dictionary);

  std::unique_ptr<SensingOperator> op;
  InitContext ictx;
  ictx.array = &fx.data.array;
  ictx.combiner = &fx.combiner->w;
  if (kind == ModelKind::kLista) {
    op = std::make_unique<SensingOperator>(fx.combiner->w, fx.dictionary);
    ictx.op = op.get();
  }
  Rng rng(cfg.init_seed());
  const UnfoldedParams init = init_params(kind, cfg.dims(kind), cfg.train.init, rng, ictx);

  tc.seed = cfg.init_seed();
  tc.threads = o.threads;
  const TrainResult res = train(init, train_set, test_set.samples, tc, [&](const EpochRecord& e) {
    if (!o.quiet) {
      std::cerr << "epoch " << e.epoch << " loss " << fmt(e.train_loss, 6) << " test " << fmt(e.test_nmse_db)
                << " dB (" << fmt(e.wall_seconds, 1) << " s)\n";
    }
  });

  if (const fs::path parent = fs::path(o.output).parent_path(); !parent.empty()) fs::create_directories(parent);
  save_checkpoint(res.params, res.adam, o.output);
  const std::string history = o.history.empty() ? o.output + ".history.csv" : o.history;
  {
    std::ofstream out = open_out(history);
    out << "# model=" << to_string(kind) << " layers=" << cfg.layers << " seed=" << cfg.seed
        << " init=" << to_string(tc.init) << " learning_rate=" << tc.adam.learning_rate
        << " lr_schedule=" << to_string(tc.schedule) << " batch_size=" << tc.batch_size
        << " max_epochs=" << tc.max_epochs << " patience=" << tc.patience << " train_size=" << train_set.size()
        << "\n";
    out << "# initial_test_nmse_db=" << std::setprecision(17) << res.history.initial_test_nmse_db
        << " initial_test_loss=" << res.history.initial_test_loss << " best_epoch=" << res.history.best_epoch
        << " best_test_loss=" << res.history.best_test_loss << " best_test_nmse_db=" << res.history.best_test_nmse_db
        << "\n";
    res.history.write_csv(out, cfg.record_timing);
  }
  std::cout << "final test NMSE " << fmt(res.history.best_test_nmse_db) << " dB (best epoch "
            << res.history.best_epoch << ", initial " << fmt(res.history.initial_test_nmse_db) << " dB)\n";
  std::cout << "checkpoint " << o.output << ", history " << history << "\n";
  return 0;
}

int cmd_bench(const Options& o) {
  const ExperimentConfig cfg = load(o);
  const BenchmarkFixtures fx = build_fixtures(cfg);
  BenchmarkSpec spec;
  std::vector<Method> methods = cfg.bench_methods;
  if (!o.methods.empty()) {
    methods.clear();
    for (const auto& name : split_list(o.methods)) methods.push_back(parse_method(name));
  }
  for (Method m : methods) {
    MethodSpec ms = cfg.method(m);
    if (is_learned(m)) ms.checkpoint = checkpoint_path(o.ckpt_dir, m);
    spec.methods.push_back(ms);
  }
  spec.snr_db = cfg.bench_snr_db;
  spec.test_size = cfg.bench_test_size;
  spec.seed = cfg.bench_seed();
  spec.record_timing = cfg.record_timing;
  spec.threads = o.threads;
  ResultTable table = run_benchmark(spec, fx);
  table.metadata.insert(table.metadata.begin(), "config_seed=" + std::to_string(cfg.seed));
  {
    std::ofstream out = open_out(o.output);
    table.write_csv(out);
  }
  for (Method m : methods) {
    std::cout << std::left << std::setw(10) << to_string(m);
    for (double snr : spec.snr_db) {
      std::cout << "  " << fmt(snr, 0) << " dB: " << fmt(table.find(to_string(m), snr)->nmse_db, 2);
    }
    std::cout << "  mean " << fmt(table.mean_nmse_db(to_string(m)), 2) << " dB\n";
  }
  return 0;
}

int cmd_sweep(const Options& o) {
  const ExperimentConfig cfg = load(o);
  const BenchmarkFixtures fx = build_fixtures(cfg);
  SweepSpec spec;
  spec.layers = o.layers.empty() ? cfg.sweep_layers : parse_numbers<int>(o.layers, "layer");
  spec.seeds = o.seeds.empty() ? cfg.sweep_seeds : parse_numbers<std::uint64_t>(o.seeds, "seed");
  if (spec.layers.empty()) throw ConfigError("--layers is empty");
  spec.dims = cfg.dims(ModelKind::kSdlLista);
  spec.train = cfg.train_for(ModelKind::kSdlLista);
  if (o.epochs >= 0) spec.train.max_epochs = o.epochs;
  spec.train.threads = o.threads;
  spec.train_size = cfg.train_size;
  spec.test_size = cfg.test_size;
  spec.data_seed = cfg.train_data_seed();
  spec.test_seed = cfg.test_data_seed();
  const auto runs = convergence_sweep(spec, fx, [&](const SweepRun& run, const EpochRecord& e) {
    if (!o.quiet) {
      std::cerr << "L=" << run.layers << " seed=" << run.seed << " epoch " << e.epoch << " test "
                << fmt(e.test_nmse_db) << " dB\n";
    }
  });
  std::vector<std::string> meta;
  std::ostringstream seeds;
  for (std::size_t i = 0; i < spec.seeds.size(); ++i) seeds << (i ? ";" : "") << spec.seeds[i];
  meta.push_back("model=sdl-lista config_seed=" + std::to_string(cfg.seed) + " seeds=" + seeds.str());
  {
    std::ofstream out = open_out(o.output);
    write_sweep_csv(runs, meta, out);
  }
  for (const auto& [layers, mean] : sweep_summary(runs)) {
    std::cout << "L=" << layers << " mean best test NMSE " << fmt(mean) << " dB\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Near-field channel estimation: simulation, sparse solvers and unfolded networks"};
  app.require_subcommand(1);
  Options o;
  app.add_option("--threads", o.threads, "worker threads (results do not depend on it)")
      ->check(CLI::PositiveNumber);
  app.add_flag("--no-timing", o.no_timing, "write wall-time columns as 0");
  app.add_flag("-q,--quiet", o.quiet, "no per-epoch progress on stderr");

  auto* init = app.add_subcommand("init-config", "write a preset config");
  init->add_option("--preset", o.preset, "paper or desk")->check(CLI::IsMember({"paper", "desk"}));
  init->add_option("-o,--output", o.output, "config file")->required();

  auto* coh = app.add_subcommand("coherence-report", "audit neighbouring-atom coherence of W A");
  coh->add_option("-c,--config", o.config)->required();
  coh->add_option("-o,--output", o.output, "CSV of audited pairs");
  coh->add_flag("--identity", o.identity, "use W = I (audit the dictionary itself)");

  auto* gen = app.add_subcommand("gen-data", "generate a dataset cache");
  gen->add_option("-c,--config", o.config)->required();
  gen->add_option("--kind", o.kind)->required()->check(CLI::IsMember({"lista", "sdl"}));
  gen->add_option("--split", o.split)->check(CLI::IsMember({"train", "test"}));
  gen->add_option("-o,--output", o.output)->required();

  auto* tr = app.add_subcommand("train", "train LISTA or SDL-LISTA");
  tr->add_option("-c,--config", o.config)->required();
  tr->add_option("--model", o.model)->required()->check(CLI::IsMember({"lista", "sdl-lista"}));
  tr->add_option("--data", o.data, "training set cache (default: regenerate from the seed)");
  tr->add_option("--test-data", o.test_data, "test set cache (default: regenerate from the seed)");
  tr->add_option("--epochs", o.epochs, "override train.max_epochs")->check(CLI::NonNegativeNumber);
  tr->add_option("--history", o.history, "history CSV (default: CKPT.history.csv)");
  tr->add_option("-o,--output", o.output, "checkpoint")->required();

  auto* be = app.add_subcommand("bench", "NMSE versus SNR for several methods");
  be->add_option("-c,--config", o.config)->required();
  be->add_option("--methods", o.methods, "comma list of omp,fista,ista,lista,sdl-lista");
  be->add_option("--ckpt-dir", o.ckpt_dir, "directory holding lista.ckpt / sdl-lista.ckpt");
  be->add_option("-o,--output", o.output)->required();

  auto* sw = app.add_subcommand("sweep-layers", "train SDL-LISTA at several depths");
  sw->add_option("-c,--config", o.config)->required();
  sw->add_option("--layers", o.layers, "comma list of depths");
  sw->add_option("--seeds", o.seeds, "comma list of seeds");
  sw->add_option("--epochs", o.epochs, "override train.max_epochs")->check(CLI::NonNegativeNumber);
  sw->add_option("-o,--output", o.output)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    set_default_threads(o.threads);
    if (init->parsed()) return cmd_init_config(o);
    if (coh->parsed()) return cmd_coherence(o);
    if (gen->parsed()) return cmd_gen_data(o);
    if (tr->parsed()) return cmd_train(o);
    if (be->parsed()) return cmd_bench(o);
    if (sw->parsed()) {
      if (sw->count("--layers") > 0 && split_list(o.layers).empty()) {
        std::cerr << "usage error: --layers needs at least one depth\n";
        return 2;
      }
      return cmd_sweep(o);
    }
  } catch (const nfcs::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.category());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
  return 0;
}
