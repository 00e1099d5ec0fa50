#pragma once

#include <vector>

#include "nfcs/numerics.hpp"

namespace nfcs {

inline constexpr double kSpeedOfLight = 299792458.0;  // m/s
inline constexpr double kPi = 3.14159265358979323846;

// Uniform linear array with elements at n * spacing, n = 0..N-1.
struct ArrayConfig {
  int n_antennas = 0;
  double carrier_freq = 0.0;  // Hz
  double wavelength = 0.0;    // m
  double spacing = 0.0;       // m
  double wavenumber = 0.0;    // rad/m
  double aperture = 0.0;      // m

  // spacing <= 0 selects half a wavelength.
  static ArrayConfig make(int n_antennas, double carrier_freq, double spacing = 0.0);
  void validate() const;
};

// Last-hop scatterer at range mu and incident angle theta from element 0;
// d is the first-hop length (0 for the direct path).
struct PathParam {
  double mu = 0.0;
  double theta = 0.0;
  double d = 0.0;
  double rho = 1.0;
};

struct PathSet {
  std::vector<PathParam> paths;
  std::vector<cplx> gains;     // alpha_q = beta_q exp(-j k (mu_q + d_q))
  std::vector<double> losses;  // beta_q = lambda sqrt(rho) / ((4 pi)^{3/2} (mu_q + d_q))

  static PathSet build(const ArrayConfig& cfg, std::vector<PathParam> paths);
  std::size_t size() const { return paths.size(); }
  void validate(const ArrayConfig& cfg) const;
};

struct ScenarioPrior {
  std::vector<double> gmm_means{-0.6, -0.45, -0.2, 0.3, 0.6};
  double gmm_variance = 0.15;
  double mu_min = 2.0;
  double mu_max = 100.0;
  double d_min = 0.0;
  double d_max = 100.0;
  int q_min = 2;
  int q_max = 6;
  // Path 0 is the line-of-sight path (d = 0, rho = 1) when set.
  bool include_direct_path = true;
  double scatter_rho = 1.0;

  void validate() const;
};

enum class ChannelKind { kExact, kFresnel };

double rayleigh_distance(const ArrayConfig& cfg);

// Spherical-wave channel with the exact element-to-scatterer distances.
CVec exact_channel(const ArrayConfig& cfg, const PathSet& paths);

// Second-order (Fresnel) approximation: h = A_Q alpha_Q.
CVec fresnel_channel(const ArrayConfig& cfg, const PathSet& paths);

CVec generate_channel(const ArrayConfig& cfg, const PathSet& paths, ChannelKind kind);

PathSet sample_scenario(const ArrayConfig& cfg, const ScenarioPrior& prior, Rng& rng);

}  // namespace nfcs
