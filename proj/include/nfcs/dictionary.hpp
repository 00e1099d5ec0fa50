#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "nfcs/channel_model.hpp"
#include "nfcs/numerics.hpp"

namespace nfcs {

inline constexpr double kFarField = std::numeric_limits<double>::infinity();

// Uniform grid over phi = sin(theta) in [-1, 1] and over inverse range
// 1/mu in [0, invdist_max]. Both axes include their endpoints; a single
// point sits at phi = 0 and 1/mu = 0.
struct GridSpec {
  int g_angle = 256;
  int g_dist = 8;
  double invdist_max = 0.5;

  int size() const { return g_angle * g_dist; }
  double angle_at(int i) const;
  double invdist_at(int j) const;
  double angle_step() const;
  double invdist_step() const;
  // Column index of grid point (angle i, distance j): distance-major.
  int column(int i, int j) const { return j * g_angle + i; }
  void validate() const;
};

struct GridPoint {
  double mu = kFarField;  // +inf for the 1/mu = 0 line
  double theta = 0.0;
};

enum class DictionarySource : std::uint8_t { kSpatialGrid = 0, kLearned = 1 };

struct Dictionary {
  CMat atoms;  // N x G
  std::vector<GridPoint> grid;
  DictionarySource source = DictionarySource::kSpatialGrid;

  int n_antennas() const { return static_cast<int>(atoms.rows()); }
  int size() const { return static_cast<int>(atoms.cols()); }
};

struct SparseCode {
  CVec alpha;                    // length G
  std::vector<int> support;      // sorted, unique
};

// Element n: exp(-j k ((n dd)^2 / (2 mu) - n dd sin(theta))). mu = kFarField
// drops the quadratic term. Throws InvalidAngle when |sin(theta)| > 1, so
// callers holding phi directly should use steering_vector_phi.
CVec steering_vector(const ArrayConfig& cfg, double mu, double theta);
CVec steering_vector_phi(const ArrayConfig& cfg, double inv_mu, double phi);

Dictionary build_spatial_dictionary(const ArrayConfig& cfg, const GridSpec& grid);

// Nearest-neighbour snap of each path to the grid in step-normalized
// (phi, 1/mu) coordinates; colliding gains add.
SparseCode quantize_paths(const GridSpec& grid, const ArrayConfig& cfg, const PathSet& paths);

// Grid column nearest to a (phi, 1/mu) point.
int nearest_column(const GridSpec& grid, double phi, double inv_mu);

struct CoherenceResult {
  double value = 0.0;
  std::pair<int, int> pair{0, 1};
};

// Largest normalized inner product over column pairs t < v. Ties resolve
// to the lexicographically smallest pair.
CoherenceResult mutual_coherence(const CMat& m);

// |<m_t, m_v>| / (||m_t|| ||m_v||).
double column_coherence(const CMat& m, int t, int v);

struct CoherenceRow {
  std::string pair_type;  // angle | distance | diagonal | antidiagonal | global
  int g1 = 0;
  int g2 = 0;
  double coherence = 0.0;
};

struct CoherenceOptions {
  // 0 scans every pair for the global value; otherwise this many random pairs.
  std::uint64_t pair_budget = 0;
  std::uint64_t seed = 0;
  int q_min = 2;
  int q_max = 6;
};

struct CoherenceReport {
  std::vector<CoherenceRow> rows;
  CoherenceRow worst_adjacent;
  CoherenceRow global;
  std::uint64_t global_pairs_scanned = 0;
  // (Q, 1/(2Q-1), violated)
  struct Threshold {
    int q = 0;
    double threshold = 0.0;
    bool adjacent_violates = false;
    bool global_violates = false;
  };
  std::vector<Threshold> thresholds;

  void write_csv(std::ostream& out) const;
};

// Coherence of Psi = W A over neighbouring grid columns plus the global scan,
// with the sparse-recovery thresholds 1/(2Q-1). Passing W = I audits the
// dictionary itself.
CoherenceReport coherence_report(const ArrayConfig& cfg, const GridSpec& grid, const CMat& combiner,
                                 const CoherenceOptions& opts = {});

// Binary dictionary file ("NFCSDICT").
void save_dictionary(const Dictionary& dict, const std::string& path);
Dictionary load_dictionary(const std::string& path);
void write_dictionary(const Dictionary& dict, std::ostream& out);
Dictionary read_dictionary(std::istream& in);

}  // namespace nfcs
