#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "nfcs/channel_model.hpp"
#include "nfcs/dictionary.hpp"
#include "nfcs/numerics.hpp"

namespace nfcs {

// Phase-shifter analog combiner, N_RF x N.
struct CombinerMatrix {
  CMat w;
  int n_rf() const { return static_cast<int>(w.rows()); }
  int n_antennas() const { return static_cast<int>(w.cols()); }
  // Checks N_RF < N and |w_rn| = 1/sqrt(N) to within tol.
  void validate(double tol = 1e-12) const;
};

enum class CombinerKind { kRandomPhase, kOrthonormal };

// W[r][n] = exp(j phi_rn) / sqrt(N), phi_rn ~ U[0, 2 pi).
CombinerMatrix sample_combiner(const ArrayConfig& cfg, int n_rf, Rng& rng);

// Rows of a random-phase combiner orthonormalized (W W^H = I). Breaks the
// constant-modulus constraint; for ablations only.
CombinerMatrix orthonormal_combiner(const ArrayConfig& cfg, int n_rf, Rng& rng);

struct Observation {
  CVec y;
  double sigma2 = 0.0;
  double snr_db = 0.0;
};

// y = W h + n, n ~ CN(0, sigma2 I).
Observation observe(const CMat& w, const CVec& h, double sigma2, Rng& rng);

// sigma2 = ||W h||^2 / (N_RF 10^{snr_db / 10}).
double sigma_for_snr(const CMat& w, const CVec& h, double snr_db);

enum class DatasetKind : std::uint8_t { kLista = 0, kSdl = 1 };

const char* to_string(DatasetKind kind);

struct Sample {
  CVec y;
  CVec label;   // alpha* (length G) for LISTA, h* (length N) for SDL
  CVec h_true;  // channel the estimate is scored against
  double snr_db = 0.0;
  double sigma2 = 0.0;
  std::uint64_t seed = 0;
};

struct DataGenConfig {
  ArrayConfig array;
  ScenarioPrior prior;
  GridSpec grid;
  ChannelKind channel = ChannelKind::kExact;
  double snr_min_db = 0.0;
  double snr_max_db = 27.0;
  // Score against the grid-snapped channel A alpha* instead of the exact one.
  // SDL samples then also observe A alpha*; LISTA samples always do.
  bool on_grid = false;
};

struct Dataset {
  DatasetKind kind = DatasetKind::kLista;
  std::vector<Sample> samples;
  std::shared_ptr<const CombinerMatrix> combiner;
  std::shared_ptr<const Dictionary> dictionary;
  DataGenConfig config;
  std::uint64_t base_seed = 0;

  std::size_t size() const { return samples.size(); }
};

// Sample i is drawn from its own stream seeded with stream_seed(base_seed, i),
// so the result is independent of the thread count.
Dataset make_dataset(DatasetKind kind, std::size_t size, const DataGenConfig& cfg,
                     std::shared_ptr<const CombinerMatrix> combiner,
                     std::shared_ptr<const Dictionary> dictionary, std::uint64_t base_seed,
                     int threads = 1);

// Single sample, as make_dataset draws it.
Sample make_sample(DatasetKind kind, const DataGenConfig& cfg, const CombinerMatrix& combiner,
                   const Dictionary& dictionary, std::uint64_t seed);

// Binary dataset cache ("NFCSDATA"). The loader checks the file against the
// combiner and dictionary it is handed and attaches them.
void save_dataset(const Dataset& data, const std::string& path);
Dataset load_dataset(const std::string& path, std::shared_ptr<const CombinerMatrix> combiner,
                     std::shared_ptr<const Dictionary> dictionary);

}  // namespace nfcs
