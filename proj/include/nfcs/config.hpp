#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "nfcs/channel_model.hpp"
#include "nfcs/dictionary.hpp"
#include "nfcs/eval.hpp"
#include "nfcs/measurement.hpp"
#include "nfcs/unfolded.hpp"

namespace nfcs {

// Training settings for one model kind that differ from the shared ones.
struct TrainOverride {
  std::optional<double> learning_rate;
  std::optional<int> batch_size;
  std::optional<int> max_epochs;
  std::optional<int> patience;
  std::optional<LrSchedule> schedule;

  bool empty() const { return !learning_rate && !batch_size && !max_epochs && !patience && !schedule; }
  void apply(TrainConfig& t) const;
};

// Everything one experiment needs. Stored as JSON; // and /* */ comments are
// accepted on load. Keys left out keep the full-scale preset value; unknown keys
// are rejected.
struct ExperimentConfig {
  std::uint64_t seed = 1;

  int n_antennas = 128;
  double carrier_freq = 28e9;
  double spacing = 0.0;  // 0 = half wavelength
  int n_rf = 32;
  ChannelKind channel = ChannelKind::kExact;
  ScenarioPrior prior;
  GridSpec grid;

  std::size_t train_size = 256000;
  std::size_t test_size = 256;
  double snr_min_db = 0.0;
  double snr_max_db = 27.0;
  bool on_grid = false;

  int layers = 10;
  int sdl_atoms = 256;

  TrainConfig train;
  TrainOverride train_lista;
  TrainOverride train_sdl_lista;

  std::vector<Method> bench_methods{Method::kOmp, Method::kFista, Method::kLista, Method::kSdlLista};
  SolverConfig omp_solver;
  SolverConfig fista_solver;
  SolverConfig ista_solver;
  std::vector<double> bench_snr_db{0.0, 9.0, 18.0, 27.0};
  std::size_t bench_test_size = 256;

  std::vector<int> sweep_layers{2, 4, 6, 8, 10};
  std::vector<std::uint64_t> sweep_seeds{1, 2, 3};

  CoherenceOptions coherence;

  // false zeroes wall-time columns in every CSV so reruns match byte-for-byte.
  bool record_timing = true;

  static ExperimentConfig preset(const std::string& name);

  ArrayConfig array() const;
  DataGenConfig data_gen() const;
  ModelDims dims(ModelKind kind) const;
  // Shared training settings with the model's overrides applied.
  TrainConfig train_for(ModelKind kind) const;
  // Method with its solver settings; checkpoints are left empty.
  MethodSpec method(Method m) const;

  // Independent streams derived from the master seed.
  std::uint64_t combiner_seed() const { return stream_seed(seed, 0); }
  std::uint64_t train_data_seed() const { return stream_seed(seed, 1); }
  std::uint64_t test_data_seed() const { return stream_seed(seed, 2); }
  std::uint64_t bench_seed() const { return stream_seed(seed, 3); }
  std::uint64_t init_seed() const { return stream_seed(seed, 4); }

  void validate() const;
};

nlohmann::ordered_json to_json(const ExperimentConfig& cfg);
ExperimentConfig config_from_json(const nlohmann::json& j);

// Parses, applies the NFCS_SEED override and validates.
ExperimentConfig load_config(const std::string& path);
void save_config(const ExperimentConfig& cfg, const std::string& path);

// Combiner and dictionary shared by generation, training and benchmarking.
BenchmarkFixtures build_fixtures(const ExperimentConfig& cfg);

}  // namespace nfcs
