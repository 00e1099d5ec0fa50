#include "nfcs/dictionary.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>

#include "nfcs/binary_io.hpp"

namespace nfcs {

namespace {

constexpr std::string_view kDictMagic = "NFCSDICT";
constexpr std::uint32_t kDictVersion = 1;

int clamp_index(double x, int count) {
  const long idx = std::lround(x);
  return static_cast<int>(std::clamp<long>(idx, 0, count - 1));
}

}  // namespace

double GridSpec::angle_at(int i) const {
  if (g_angle == 1) return 0.0;
  return -1.0 + 2.0 * i / (g_angle - 1);
}

double GridSpec::invdist_at(int j) const {
  if (g_dist == 1) return 0.0;
  return invdist_max * j / (g_dist - 1);
}

double GridSpec::angle_step() const { return g_angle == 1 ? 2.0 : 2.0 / (g_angle - 1); }

double GridSpec::invdist_step() const {
  if (g_dist == 1) return invdist_max > 0.0 ? invdist_max : 1.0;
  return invdist_max / (g_dist - 1);
}

void GridSpec::validate() const {
  if (g_angle < 1 || g_dist < 1) throw ConfigError("grid counts must be >= 1");
  if (!(invdist_max >= 0.0) || !std::isfinite(invdist_max)) {
    throw ConfigError("inverse-distance domain must be [0, x] with x >= 0");
  }
  if (g_dist > 1 && invdist_max == 0.0) {
    throw ConfigError("several distance grid lines over an empty domain");
  }
}

CVec steering_vector_phi(const ArrayConfig& cfg, double inv_mu, double phi) {
  if (!(std::abs(phi) <= 1.0)) throw InvalidAngle("|sin(theta)| = " + std::to_string(phi) + " > 1");
  if (!(inv_mu >= 0.0) || !std::isfinite(inv_mu)) {
    throw DegenerateGeometry("inverse range must be finite and >= 0");
  }
  CVec a(cfg.n_antennas);
  for (int n = 0; n < cfg.n_antennas; ++n) {
    const double x = n * cfg.spacing;
    a[n] = std::polar(1.0, -cfg.wavenumber * (x * x * inv_mu / 2.0 - x * phi));
  }
  return a;
}

CVec steering_vector(const ArrayConfig& cfg, double mu, double theta) {
  if (!std::isfinite(theta)) throw InvalidAngle("non-finite angle");
  if (!(mu > 0.0)) throw DegenerateGeometry("steering vector needs mu > 0");
  return steering_vector_phi(cfg, std::isinf(mu) ? 0.0 : 1.0 / mu, std::sin(theta));
}

Dictionary build_spatial_dictionary(const ArrayConfig& cfg, const GridSpec& grid) {
  grid.validate();
  Dictionary dict;
  dict.source = DictionarySource::kSpatialGrid;
  dict.atoms.resize(cfg.n_antennas, grid.size());
  dict.grid.resize(grid.size());
  for (int j = 0; j < grid.g_dist; ++j) {
    const double inv = grid.invdist_at(j);
    for (int i = 0; i < grid.g_angle; ++i) {
      const double phi = grid.angle_at(i);
      const int g = grid.column(i, j);
      dict.atoms.col(g) = steering_vector_phi(cfg, inv, phi);
      dict.grid[g] = GridPoint{inv == 0.0 ? kFarField : 1.0 / inv, std::asin(phi)};
    }
  }
  return dict;
}

int nearest_column(const GridSpec& grid, double phi, double inv_mu) {
  const int i = grid.g_angle == 1 ? 0 : clamp_index((phi - grid.angle_at(0)) / grid.angle_step(), grid.g_angle);
  const int j = grid.g_dist == 1 ? 0 : clamp_index(inv_mu / grid.invdist_step(), grid.g_dist);
  return grid.column(i, j);
}

SparseCode quantize_paths(const GridSpec& grid, const ArrayConfig& cfg, const PathSet& paths) {
  (void)cfg;
  SparseCode code;
  code.alpha = CVec::Zero(grid.size());
  for (std::size_t q = 0; q < paths.size(); ++q) {
    const auto& p = paths.paths[q];
    const int g = nearest_column(grid, std::sin(p.theta), 1.0 / p.mu);
    code.alpha[g] += paths.gains[q];
    code.support.push_back(g);
  }
  std::sort(code.support.begin(), code.support.end());
  code.support.erase(std::unique(code.support.begin(), code.support.end()), code.support.end());
  return code;
}

double column_coherence(const CMat& m, int t, int v) {
  const double nt = m.col(t).norm();
  const double nv = m.col(v).norm();
  if (nt == 0.0 || nv == 0.0) throw ZeroColumn("column " + std::to_string(nt == 0.0 ? t : v));
  return std::min(1.0, std::abs(m.col(t).dot(m.col(v))) / (nt * nv));
}

CoherenceResult mutual_coherence(const CMat& m) {
  const Eigen::Index g = m.cols();
  if (g < 2) throw DimensionMismatch("mutual coherence needs at least two columns");

  Eigen::MatrixXcd unit = m;  // column-major copy, columns normalized
  for (Eigen::Index c = 0; c < g; ++c) {
    const double n = unit.col(c).norm();
    if (n == 0.0) throw ZeroColumn("column " + std::to_string(c));
    unit.col(c) /= n;
  }

  CoherenceResult best{-1.0, {0, 1}};
  constexpr Eigen::Index kBlock = 256;
  for (Eigen::Index t0 = 0; t0 < g; t0 += kBlock) {
    const Eigen::Index rows = std::min(kBlock, g - t0);
    const Eigen::MatrixXcd gram = unit.middleCols(t0, rows).adjoint() * unit;
    for (Eigen::Index r = 0; r < rows; ++r) {
      const Eigen::Index t = t0 + r;
      for (Eigen::Index v = t + 1; v < g; ++v) {
        const double c = std::abs(gram(r, v));
        if (c > best.value) {
          best.value = c;
          best.pair = {static_cast<int>(t), static_cast<int>(v)};
        }
      }
    }
  }
  best.value = std::clamp(best.value, 0.0, 1.0);
  return best;
}

CoherenceReport coherence_report(const ArrayConfig& cfg, const GridSpec& grid, const CMat& combiner,
                                 const CoherenceOptions& opts) {
  if (combiner.cols() != cfg.n_antennas) {
    throw DimensionMismatch("combiner has " + std::to_string(combiner.cols()) + " columns, array has " +
                            std::to_string(cfg.n_antennas) + " antennas");
  }
  const Dictionary dict = build_spatial_dictionary(cfg, grid);
  const CMat psi = combiner * dict.atoms;

  CoherenceReport report;
  report.worst_adjacent.coherence = -1.0;
  auto audit = [&](const char* type, int i1, int j1, int i2, int j2) {
    if (i2 < 0 || i2 >= grid.g_angle || j2 >= grid.g_dist) return;
    const int g1 = grid.column(i1, j1);
    const int g2 = grid.column(i2, j2);
    CoherenceRow row{type, std::min(g1, g2), std::max(g1, g2), column_coherence(psi, g1, g2)};
    if (row.coherence > report.worst_adjacent.coherence) report.worst_adjacent = row;
    report.rows.push_back(std::move(row));
  };
  for (int j = 0; j < grid.g_dist; ++j) {
    for (int i = 0; i < grid.g_angle; ++i) {
      audit("angle", i, j, i + 1, j);
      audit("distance", i, j, i, j + 1);
      audit("diagonal", i, j, i + 1, j + 1);
      audit("antidiagonal", i, j, i - 1, j + 1);
    }
  }
  if (report.rows.empty()) report.worst_adjacent.coherence = 0.0;

  const auto g = static_cast<std::uint64_t>(psi.cols());
  const std::uint64_t all_pairs = g * (g - 1) / 2;
  if (g >= 2) {
    if (opts.pair_budget == 0 || opts.pair_budget >= all_pairs) {
      const CoherenceResult res = mutual_coherence(psi);
      report.global = CoherenceRow{"global", res.pair.first, res.pair.second, res.value};
      report.global_pairs_scanned = all_pairs;
    } else {
      Rng rng(opts.seed);
      report.global = CoherenceRow{"global", 0, 1, -1.0};
      for (std::uint64_t k = 0; k < opts.pair_budget; ++k) {
        auto a = static_cast<int>(rng.uniform_index(g));
        auto b = static_cast<int>(rng.uniform_index(g - 1));
        if (b >= a) ++b;
        if (a > b) std::swap(a, b);
        const double c = column_coherence(psi, a, b);
        if (c > report.global.coherence) report.global = CoherenceRow{"global", a, b, c};
      }
      report.global_pairs_scanned = opts.pair_budget;
    }
    report.rows.push_back(report.global);
  }

  for (int q = opts.q_min; q <= opts.q_max; ++q) {
    const double thr = 1.0 / (2.0 * q - 1.0);
    report.thresholds.push_back(
        {q, thr, report.worst_adjacent.coherence >= thr, report.global.coherence >= thr});
  }
  return report;
}

void CoherenceReport::write_csv(std::ostream& out) const {
  out << "# worst_adjacent=" << std::setprecision(17) << worst_adjacent.coherence
      << " global=" << global.coherence << " global_pairs_scanned=" << global_pairs_scanned << "\n";
  out << "pair_type,g1,g2,coherence\n";
  for (const auto& r : rows) {
    out << r.pair_type << ',' << r.g1 << ',' << r.g2 << ',' << std::setprecision(17) << r.coherence << "\n";
  }
}

void write_dictionary(const Dictionary& dict, std::ostream& out) {
  using namespace binio;
  put_magic(out, kDictMagic);
  put_u32(out, kDictVersion);
  put_u32(out, static_cast<std::uint32_t>(dict.n_antennas()));
  put_u32(out, static_cast<std::uint32_t>(dict.size()));
  for (int g = 0; g < dict.size(); ++g) {
    for (int n = 0; n < dict.n_antennas(); ++n) put_c128(out, dict.atoms(n, g));
  }
  for (int g = 0; g < dict.size(); ++g) {
    const bool have = static_cast<std::size_t>(g) < dict.grid.size() &&
                      dict.source == DictionarySource::kSpatialGrid;
    put_f64(out, have ? dict.grid[g].mu : std::nan(""));
    put_f64(out, have ? dict.grid[g].theta : std::nan(""));
  }
}

Dictionary read_dictionary(std::istream& in) {
  using namespace binio;
  expect_magic(in, kDictMagic);
  const std::uint32_t version = get_u32(in);
  if (version != kDictVersion) throw FormatError("unsupported dictionary version " + std::to_string(version));
  const std::uint32_t n = get_u32(in);
  const std::uint32_t g = get_u32(in);
  Dictionary dict;
  dict.atoms.resize(n, g);
  for (std::uint32_t c = 0; c < g; ++c) {
    for (std::uint32_t r = 0; r < n; ++r) dict.atoms(r, c) = get_c128(in);
  }
  dict.grid.resize(g);
  bool learned = false;
  for (std::uint32_t c = 0; c < g; ++c) {
    dict.grid[c].mu = get_f64(in);
    dict.grid[c].theta = get_f64(in);
    learned = learned || std::isnan(dict.grid[c].theta);
  }
  // Learned atoms carry no grid coordinates; they are written as NaN.
  dict.source = learned ? DictionarySource::kLearned : DictionarySource::kSpatialGrid;
  return dict;
}

void save_dictionary(const Dictionary& dict, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw MissingArtifact("cannot write " + path);
  write_dictionary(dict, out);
}

Dictionary load_dictionary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifact("cannot open " + path);
  return read_dictionary(in);
}

}  // namespace nfcs
