#include "nfcs/eval.hpp"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "nfcs/parallel.hpp"

namespace nfcs {

namespace {

constexpr std::size_t kEstimateChunk = 64;

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::string fmt_fixed(double v, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

template <typename T>
std::string join(const std::vector<T>& values, const char* sep = ";") {
  std::ostringstream os;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0) os << sep;
    os << values[i];
  }
  return os.str();
}

void check_learned_dims(const UnfoldedParams& params, const BenchmarkFixtures& fx, const std::string& path) {
  if (const auto* lp = std::get_if<ListaParams>(&params)) {
    if (lp->atoms() != fx.dictionary->size() || lp->n_rf() != fx.combiner->n_rf()) {
      throw ConfigError("checkpoint " + path + " does not match the dictionary/combiner dimensions");
    }
  } else {
    const auto& sp = std::get<SdlListaParams>(params);
    if (sp.n_antennas() != fx.combiner->n_antennas() || sp.n_rf() != fx.combiner->n_rf()) {
      throw ConfigError("checkpoint " + path + " does not match the array/combiner dimensions");
    }
  }
}

}  // namespace

double nmse(const CVec& h_hat, const CVec& h_star) {
  if (h_hat.size() != h_star.size()) throw DimensionMismatch("nmse: length mismatch");
  const double den = h_star.squaredNorm();
  if (den == 0.0) throw ZeroReference("nmse: reference channel is zero");
  return (h_hat - h_star).squaredNorm() / den;
}

double to_db(double linear) {
  if (!(linear > 0.0)) return kNmseFloorDb;
  return std::max(kNmseFloorDb, 10.0 * std::log10(linear));
}

double nmse_db(const CVec& h_hat, const CVec& h_star) { return to_db(nmse(h_hat, h_star)); }

const char* to_string(Method m) {
  switch (m) {
    case Method::kOmp: return "omp";
    case Method::kFista: return "fista";
    case Method::kIsta: return "ista";
    case Method::kLista: return "lista";
    case Method::kSdlLista: return "sdl-lista";
  }
  return "?";
}

Method parse_method(const std::string& name) {
  if (name == "omp") return Method::kOmp;
  if (name == "fista") return Method::kFista;
  if (name == "ista") return Method::kIsta;
  if (name == "lista") return Method::kLista;
  if (name == "sdl-lista" || name == "sdl") return Method::kSdlLista;
  throw ConfigError("unknown method '" + name + "'");
}

bool is_learned(Method m) { return m == Method::kLista || m == Method::kSdlLista; }

void BenchmarkSpec::validate() const {
  if (methods.empty()) throw ConfigError("benchmark needs at least one method");
  if (snr_db.empty()) throw ConfigError("benchmark needs at least one SNR point");
  if (test_size == 0) throw ConfigError("benchmark test_size must be positive");
  for (double s : snr_db) {
    if (std::isnan(s)) throw ConfigError("benchmark SNR is NaN");
  }
  for (const auto& m : methods) {
    if (is_learned(m.method) && m.checkpoint.empty()) {
      throw ConfigError(std::string("no checkpoint path for ") + to_string(m.method));
    }
    if (!is_learned(m.method) && m.solver.iters < 1) throw ConfigError("solver iterations must be >= 1");
  }
}

const ResultRow* ResultTable::find(const std::string& method, double snr_db) const {
  for (const auto& r : rows) {
    if (r.method == method && r.snr_db == snr_db) return &r;
  }
  return nullptr;
}

double ResultTable::mean_nmse_db(const std::string& method) const {
  double sum = 0.0;
  int count = 0;
  for (const auto& r : rows) {
    if (r.method == method) {
      sum += r.nmse_db;
      ++count;
    }
  }
  if (count == 0) throw ConfigError("no rows for method " + method);
  return sum / count;
}

void ResultTable::write_csv(std::ostream& out) const {
  for (const auto& m : metadata) out << "# " << m << "\n";
  out << "method,snr_db,nmse_db,runtime_ms,n_samples\n";
  for (const auto& r : rows) {
    out << r.method << ',' << fmt(r.snr_db) << ',' << fmt(r.nmse_db) << ',' << fmt_fixed(r.runtime_ms, 4)
        << ',' << r.n_samples << "\n";
  }
}

std::vector<Sample> make_test_set(const BenchmarkFixtures& fx, double snr_db, std::size_t size,
                                  std::uint64_t seed, int threads) {
  DataGenConfig cfg = fx.data;
  cfg.snr_min_db = snr_db;
  cfg.snr_max_db = snr_db;
  return make_dataset(DatasetKind::kSdl, size, cfg, fx.combiner, fx.dictionary, seed, threads).samples;
}

std::vector<CVec> estimate(const MethodSpec& method, const SensingOperator& op,
                           const UnfoldedParams* learned, const ModelContext& ctx,
                           const std::vector<Sample>& samples, int threads) {
  std::vector<CVec> out(samples.size());
  if (is_learned(method.method)) {
    if (learned == nullptr) throw MissingCheckpoint(std::string("no parameters for ") + to_string(method.method));
    const std::size_t chunks = (samples.size() + kEstimateChunk - 1) / kEstimateChunk;
    parallel_for(chunks, threads, [&](std::size_t k) {
      const std::size_t begin = k * kEstimateChunk;
      const std::size_t end = std::min(samples.size(), begin + kEstimateChunk);
      CBatch y(samples[begin].y.size(), static_cast<Eigen::Index>(end - begin));
      for (std::size_t i = begin; i < end; ++i) y.col(static_cast<Eigen::Index>(i - begin)) = samples[i].y;
      const CBatch h = estimate_channels(*learned, ctx, y);
      for (std::size_t i = begin; i < end; ++i) out[i] = h.col(static_cast<Eigen::Index>(i - begin));
    });
    return out;
  }
  if (op.dictionary() == nullptr) throw ConfigError("classic solvers need a dictionary-backed operator");
  const Dictionary& dict = *op.dictionary();
  parallel_for(samples.size(), threads, [&](std::size_t i) {
    const Sample& s = samples[i];
    CVec alpha;
    switch (method.method) {
      case Method::kOmp: alpha = omp(op, s.y, method.solver, s.sigma2).alpha; break;
      case Method::kFista: alpha = fista(op, s.y, method.solver).alpha; break;
      case Method::kIsta: alpha = ista(op, s.y, method.solver).alpha; break;
      default: break;
    }
    out[i] = reconstruct_channel(dict, alpha);
  });
  return out;
}

ResultTable run_benchmark(const BenchmarkSpec& spec, const BenchmarkFixtures& fx) {
  spec.validate();
  if (!fx.combiner || !fx.dictionary) throw ConfigError("benchmark needs a combiner and a dictionary");

  // Load every checkpoint before any compute so a missing file fails fast.
  std::vector<std::unique_ptr<UnfoldedParams>> learned(spec.methods.size());
  for (std::size_t m = 0; m < spec.methods.size(); ++m) {
    const MethodSpec& ms = spec.methods[m];
    if (!is_learned(ms.method)) continue;
    learned[m] = std::make_unique<UnfoldedParams>(load_checkpoint(ms.checkpoint));
    const ModelKind want = ms.method == Method::kLista ? ModelKind::kLista : ModelKind::kSdlLista;
    if (kind_of(*learned[m]) != want) {
      throw ConfigError("checkpoint " + ms.checkpoint + " holds a " + to_string(kind_of(*learned[m])) +
                        " model, expected " + to_string(want));
    }
    check_learned_dims(*learned[m], fx, ms.checkpoint);
  }

  const SensingOperator op(fx.combiner->w, fx.dictionary);
  const ModelContext ctx{&fx.combiner->w, fx.dictionary.get()};

  ResultTable table;
  std::vector<std::string> names;
  for (const auto& m : spec.methods) names.emplace_back(to_string(m.method));
  table.metadata.push_back("methods=" + join(names));
  table.metadata.push_back("snr_db=" + join(spec.snr_db));
  table.metadata.push_back("seed=" + std::to_string(spec.seed) + " test_size=" + std::to_string(spec.test_size));
  table.metadata.push_back("n_antennas=" + std::to_string(fx.combiner->n_antennas()) +
                           " n_rf=" + std::to_string(fx.combiner->n_rf()) +
                           " atoms=" + std::to_string(fx.dictionary->size()));

  for (double snr : spec.snr_db) {
    const std::vector<Sample> samples = make_test_set(fx, snr, spec.test_size, spec.seed, spec.threads);
    for (std::size_t m = 0; m < spec.methods.size(); ++m) {
      const auto start = std::chrono::steady_clock::now();
      const std::vector<CVec> est = estimate(spec.methods[m], op, learned[m].get(), ctx, samples, spec.threads);
      const double elapsed_ms =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
      double sum = 0.0;
      for (std::size_t i = 0; i < samples.size(); ++i) sum += nmse(est[i], samples[i].h_true);
      ResultRow row;
      row.method = names[m];
      row.snr_db = snr;
      row.nmse_db = to_db(sum / static_cast<double>(samples.size()));
      row.runtime_ms = spec.record_timing ? elapsed_ms / static_cast<double>(samples.size()) : 0.0;
      row.n_samples = samples.size();
      table.rows.push_back(row);
    }
  }
  return table;
}

std::vector<SweepRun> convergence_sweep(const SweepSpec& spec, const BenchmarkFixtures& fx,
                                        const std::function<void(const SweepRun&, const EpochRecord&)>& on_epoch) {
  if (spec.layers.empty()) throw ConfigError("layer sweep needs at least one depth");
  if (spec.seeds.empty()) throw ConfigError("layer sweep needs at least one seed");
  for (int l : spec.layers) {
    if (l < 1) throw ConfigError("layer counts must be >= 1");
  }
  const Dataset train_set = make_dataset(DatasetKind::kSdl, spec.train_size, fx.data, fx.combiner,
                                         fx.dictionary, spec.data_seed, spec.train.threads);
  const Dataset test_set = make_dataset(DatasetKind::kSdl, spec.test_size, fx.data, fx.combiner,
                                        fx.dictionary, spec.test_seed, spec.train.threads);
  InitContext ictx;
  ictx.array = &fx.data.array;
  ictx.combiner = &fx.combiner->w;

  std::vector<SweepRun> runs;
  for (int layers : spec.layers) {
    for (std::uint64_t seed : spec.seeds) {
      SweepRun run;
      run.layers = layers;
      run.seed = seed;
      ModelDims dims = spec.dims;
      dims.layers = layers;
      Rng rng(seed);
      const UnfoldedParams init = init_params(ModelKind::kSdlLista, dims, spec.train.init, rng, ictx);
      TrainConfig cfg = spec.train;
      cfg.seed = seed;
      std::function<void(const EpochRecord&)> hook;
      if (on_epoch) hook = [&](const EpochRecord& rec) { on_epoch(run, rec); };
      run.history = train(init, train_set, test_set.samples, cfg, hook).history;
      runs.push_back(std::move(run));
    }
  }
  return runs;
}

std::map<int, double> sweep_summary(const std::vector<SweepRun>& runs) {
  std::map<int, std::pair<double, int>> acc;
  for (const auto& r : runs) {
    auto& a = acc[r.layers];
    a.first += r.history.best_test_nmse_db;
    a.second += 1;
  }
  std::map<int, double> out;
  for (const auto& [layers, a] : acc) out[layers] = a.first / a.second;
  return out;
}

void write_sweep_csv(const std::vector<SweepRun>& runs, const std::vector<std::string>& metadata,
                     std::ostream& out) {
  for (const auto& m : metadata) out << "# " << m << "\n";
  out << "layers,epoch,train_loss,test_nmse_db\n";
  for (const auto& r : runs) {
    out << "# run layers=" << r.layers << " seed=" << r.seed << " best_epoch=" << r.history.best_epoch
        << " best_test_nmse_db=" << fmt(r.history.best_test_nmse_db)
        << " initial_test_nmse_db=" << fmt(r.history.initial_test_nmse_db) << "\n";
    for (const auto& e : r.history.epochs) {
      out << r.layers << ',' << e.epoch << ',' << fmt(e.train_loss) << ',' << fmt(e.test_nmse_db) << "\n";
    }
  }
  for (const auto& [layers, mean] : sweep_summary(runs)) {
    out << "# summary layers=" << layers << " mean_best_test_nmse_db=" << fmt(mean) << "\n";
  }
}

}  // namespace nfcs
