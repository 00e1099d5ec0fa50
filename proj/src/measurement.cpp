#include "nfcs/measurement.hpp"

#include <cmath>
#include <fstream>

#include "nfcs/binary_io.hpp"
#include "nfcs/parallel.hpp"

namespace nfcs {

namespace {

constexpr std::string_view kDataMagic = "NFCSDATA";
constexpr std::uint32_t kDataVersion = 2;

}  // namespace

void CombinerMatrix::validate(double tol) const {
  if (n_rf() < 1 || n_rf() >= n_antennas()) {
    throw ConfigError("combiner needs 1 <= N_RF < N, got N_RF=" + std::to_string(n_rf()) +
                      " N=" + std::to_string(n_antennas()));
  }
  const double expected = 1.0 / std::sqrt(static_cast<double>(n_antennas()));
  for (Eigen::Index r = 0; r < w.rows(); ++r) {
    for (Eigen::Index c = 0; c < w.cols(); ++c) {
      if (std::abs(std::abs(w(r, c)) - expected) > tol) {
        throw ConfigError("combiner entry violates the constant-modulus constraint");
      }
    }
  }
}

const char* to_string(DatasetKind kind) { return kind == DatasetKind::kLista ? "lista" : "sdl"; }

CombinerMatrix sample_combiner(const ArrayConfig& cfg, int n_rf, Rng& rng) {
  if (n_rf < 1 || n_rf >= cfg.n_antennas) {
    throw ConfigError("n_rf must satisfy 1 <= n_rf < N");
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(cfg.n_antennas));
  CombinerMatrix comb;
  comb.w.resize(n_rf, cfg.n_antennas);
  for (int r = 0; r < n_rf; ++r) {
    for (int n = 0; n < cfg.n_antennas; ++n) {
      comb.w(r, n) = std::polar(scale, 2.0 * kPi * rng.uniform());
    }
  }
  return comb;
}

CombinerMatrix orthonormal_combiner(const ArrayConfig& cfg, int n_rf, Rng& rng) {
  CombinerMatrix comb = sample_combiner(cfg, n_rf, rng);
  // Thin QR of W^H gives orthonormal columns spanning the same row space.
  Eigen::MatrixXcd wt = comb.w.adjoint();
  Eigen::HouseholderQR<Eigen::MatrixXcd> qr(wt);
  Eigen::MatrixXcd q = qr.householderQ() * Eigen::MatrixXcd::Identity(wt.rows(), wt.cols());
  comb.w = q.adjoint();
  return comb;
}

Observation observe(const CMat& w, const CVec& h, double sigma2, Rng& rng) {
  Observation obs;
  obs.y = matvec(w, h);
  obs.sigma2 = sigma2;
  if (sigma2 > 0.0) {
    for (Eigen::Index r = 0; r < obs.y.size(); ++r) obs.y[r] += rng.complex_normal(sigma2);
  }
  return obs;
}

double sigma_for_snr(const CMat& w, const CVec& h, double snr_db) {
  const CVec wh = matvec(w, h);
  const double power = wh.squaredNorm();
  if (power == 0.0) throw ZeroSignal("W h is zero; SNR undefined");
  return power / (static_cast<double>(w.rows()) * std::pow(10.0, snr_db / 10.0));
}

Sample make_sample(DatasetKind kind, const DataGenConfig& cfg, const CombinerMatrix& combiner,
                   const Dictionary& dictionary, std::uint64_t seed) {
  Rng rng(seed);
  const PathSet paths = sample_scenario(cfg.array, cfg.prior, rng);
  Sample s;
  s.seed = seed;
  // One draw either way keeps the noise stream aligned across SNR settings;
  // a degenerate range also admits snr = +inf (noiseless).
  const double u = rng.uniform();
  s.snr_db = cfg.snr_min_db == cfg.snr_max_db ? cfg.snr_min_db
                                              : cfg.snr_min_db + (cfg.snr_max_db - cfg.snr_min_db) * u;

  CVec h_obs;
  if (kind == DatasetKind::kLista) {
    const SparseCode code = quantize_paths(cfg.grid, cfg.array, paths);
    h_obs = dictionary.atoms * code.alpha;
    s.h_true = cfg.on_grid ? h_obs : generate_channel(cfg.array, paths, cfg.channel);
    s.label = code.alpha;
  } else {
    s.h_true = cfg.on_grid ? CVec(dictionary.atoms * quantize_paths(cfg.grid, cfg.array, paths).alpha)
                           : generate_channel(cfg.array, paths, cfg.channel);
    s.label = s.h_true;
    h_obs = s.h_true;
  }
  s.sigma2 = sigma_for_snr(combiner.w, h_obs, s.snr_db);
  s.y = observe(combiner.w, h_obs, s.sigma2, rng).y;
  return s;
}

Dataset make_dataset(DatasetKind kind, std::size_t size, const DataGenConfig& cfg,
                     std::shared_ptr<const CombinerMatrix> combiner,
                     std::shared_ptr<const Dictionary> dictionary, std::uint64_t base_seed,
                     int threads) {
  if (!combiner || !dictionary) throw ConfigError("dataset needs a combiner and a dictionary");
  if (combiner->n_antennas() != cfg.array.n_antennas ||
      dictionary->n_antennas() != cfg.array.n_antennas) {
    throw DimensionMismatch("combiner/dictionary do not match the array size");
  }
  if (dictionary->size() != cfg.grid.size()) {
    throw DimensionMismatch("dictionary size does not match the grid");
  }
  Dataset data;
  data.kind = kind;
  data.combiner = combiner;
  data.dictionary = dictionary;
  data.config = cfg;
  data.base_seed = base_seed;
  data.samples.resize(size);
  parallel_for(size, threads, [&](std::size_t i) {
    data.samples[i] = make_sample(kind, cfg, *combiner, *dictionary, stream_seed(base_seed, i));
  });
  return data;
}

void save_dataset(const Dataset& data, const std::string& path) {
  using namespace binio;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw MissingArtifact("cannot write " + path);
  put_magic(out, kDataMagic);
  put_u32(out, kDataVersion);
  put_u8(out, static_cast<std::uint8_t>(data.kind));
  put_u64(out, data.samples.size());
  put_u32(out, static_cast<std::uint32_t>(data.combiner->n_antennas()));
  put_u32(out, static_cast<std::uint32_t>(data.combiner->n_rf()));
  put_u32(out, static_cast<std::uint32_t>(data.dictionary ? data.dictionary->size() : 0));
  for (const auto& s : data.samples) {
    put_cvec(out, s.y);
    put_cvec(out, s.label);
    put_cvec(out, s.h_true);
    put_f64(out, s.snr_db);
    put_f64(out, s.sigma2);
    put_u64(out, s.seed);
  }
}

Dataset load_dataset(const std::string& path, std::shared_ptr<const CombinerMatrix> combiner,
                     std::shared_ptr<const Dictionary> dictionary) {
  using namespace binio;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifact("cannot open " + path);
  expect_magic(in, kDataMagic);
  const std::uint32_t version = get_u32(in);
  if (version != kDataVersion) throw FormatError("unsupported dataset version " + std::to_string(version));
  const std::uint8_t kind_byte = get_u8(in);
  if (kind_byte > 1) throw FormatError("unknown dataset kind " + std::to_string(kind_byte));
  const std::uint64_t count = get_u64(in);
  const std::uint32_t n = get_u32(in);
  const std::uint32_t n_rf = get_u32(in);
  const std::uint32_t g = get_u32(in);
  if (!combiner || static_cast<std::uint32_t>(combiner->n_antennas()) != n ||
      static_cast<std::uint32_t>(combiner->n_rf()) != n_rf) {
    throw DimensionMismatch("dataset " + path + " was generated for a different combiner");
  }
  Dataset data;
  data.kind = static_cast<DatasetKind>(kind_byte);
  if (data.kind == DatasetKind::kLista &&
      (!dictionary || static_cast<std::uint32_t>(dictionary->size()) != g)) {
    throw DimensionMismatch("dataset " + path + " was generated for a different dictionary");
  }
  data.combiner = combiner;
  data.dictionary = dictionary;
  const Eigen::Index label_len = data.kind == DatasetKind::kLista ? g : n;
  data.samples.resize(count);
  for (auto& s : data.samples) {
    s.y = get_cvec(in, n_rf);
    s.label = get_cvec(in, label_len);
    s.h_true = get_cvec(in, n);
    s.snr_db = get_f64(in);
    s.sigma2 = get_f64(in);
    s.seed = get_u64(in);
  }
  return data;
}

}  // namespace nfcs
