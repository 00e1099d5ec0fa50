#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "nfcs/classic_solvers.hpp"
#include "nfcs/measurement.hpp"
#include "nfcs/unfolded.hpp"

namespace nfcs {

inline constexpr double kNmseFloorDb = -120.0;

// ||h_hat - h_star||^2 / ||h_star||^2
double nmse(const CVec& h_hat, const CVec& h_star);
// 10 log10(x), floored at kNmseFloorDb.
double to_db(double linear);
double nmse_db(const CVec& h_hat, const CVec& h_star);

enum class Method { kOmp, kFista, kIsta, kLista, kSdlLista };

const char* to_string(Method m);
Method parse_method(const std::string& name);
bool is_learned(Method m);

struct MethodSpec {
  Method method = Method::kOmp;
  SolverConfig solver;     // classic methods
  std::string checkpoint;  // learned methods
};

struct BenchmarkSpec {
  std::vector<MethodSpec> methods;
  std::vector<double> snr_db{0.0, 9.0, 18.0, 27.0};
  std::size_t test_size = 256;
  std::uint64_t seed = 0;
  // false writes every runtime as 0 so result files compare byte-for-byte.
  bool record_timing = true;
  int threads = 1;

  void validate() const;
};

struct ResultRow {
  std::string method;
  double snr_db = 0.0;
  double nmse_db = 0.0;
  double runtime_ms = 0.0;  // mean wall time of one estimate
  std::size_t n_samples = 0;
};

struct ResultTable {
  std::vector<std::string> metadata;  // written as "# ..." lines
  std::vector<ResultRow> rows;

  const ResultRow* find(const std::string& method, double snr_db) const;
  // Mean nmse_db over the SNR points of one method.
  double mean_nmse_db(const std::string& method) const;
  void write_csv(std::ostream& out) const;
};

struct BenchmarkFixtures {
  DataGenConfig data;
  std::shared_ptr<const CombinerMatrix> combiner;
  std::shared_ptr<const Dictionary> dictionary;
};

// Test set at one SNR. The seed alone fixes channels and noise draws, so
// every method scored at this SNR sees the same realizations.
std::vector<Sample> make_test_set(const BenchmarkFixtures& fx, double snr_db, std::size_t size,
                                  std::uint64_t seed, int threads = 1);

ResultTable run_benchmark(const BenchmarkSpec& spec, const BenchmarkFixtures& fx);

// Channel estimates of one method for the given samples.
std::vector<CVec> estimate(const MethodSpec& method, const SensingOperator& op,
                           const UnfoldedParams* learned, const ModelContext& ctx,
                           const std::vector<Sample>& samples, int threads);

struct SweepRun {
  int layers = 0;
  std::uint64_t seed = 0;
  TrainHistory history;
};

struct SweepSpec {
  std::vector<int> layers;
  std::vector<std::uint64_t> seeds;
  ModelDims dims;  // layers overwritten per run
  TrainConfig train;
  std::size_t train_size = 0;
  std::size_t test_size = 256;
  std::uint64_t data_seed = 0;
  std::uint64_t test_seed = 0;
};

// Trains SDL-LISTA once per (layers, seed). Data are shared by every run;
// the seed drives initialization and shuffling.
std::vector<SweepRun> convergence_sweep(const SweepSpec& spec, const BenchmarkFixtures& fx,
                                        const std::function<void(const SweepRun&, const EpochRecord&)>&
                                            on_epoch = {});

// Best test NMSE per depth, averaged over seeds.
std::map<int, double> sweep_summary(const std::vector<SweepRun>& runs);

// Columns layers, epoch, train_loss, test_nmse_db; a "# run layers=.. seed=.."
// comment opens each run's block.
void write_sweep_csv(const std::vector<SweepRun>& runs, const std::vector<std::string>& metadata,
                     std::ostream& out);

}  // namespace nfcs
