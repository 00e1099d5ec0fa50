#include "nfcs/channel_model.hpp"

#include <cmath>
#include <string>

namespace nfcs {

namespace {

const double kFourPiPow = std::pow(4.0 * kPi, 1.5);

double path_loss(const ArrayConfig& cfg, double rho, double distance) {
  return cfg.wavelength * std::sqrt(rho) / (kFourPiPow * distance);
}

}  // namespace

ArrayConfig ArrayConfig::make(int n_antennas, double carrier_freq, double spacing) {
  ArrayConfig cfg;
  cfg.n_antennas = n_antennas;
  cfg.carrier_freq = carrier_freq;
  cfg.wavelength = kSpeedOfLight / carrier_freq;
  cfg.spacing = spacing > 0.0 ? spacing : cfg.wavelength / 2.0;
  cfg.wavenumber = 2.0 * kPi / cfg.wavelength;
  cfg.aperture = n_antennas * cfg.spacing;
  cfg.validate();
  return cfg;
}

void ArrayConfig::validate() const {
  if (n_antennas < 2) throw ConfigError("array needs at least 2 antennas");
  if (!(wavelength > 0.0) || !std::isfinite(wavelength)) {
    throw ConfigError("wavelength must be positive");
  }
  if (!(spacing > 0.0)) throw ConfigError("antenna spacing must be positive");
  if (std::abs(wavenumber * wavelength - 2.0 * kPi) > 1e-12) {
    throw ConfigError("wavenumber inconsistent with wavelength");
  }
  if (aperture != n_antennas * spacing) throw ConfigError("aperture != N * spacing");
}

PathSet PathSet::build(const ArrayConfig& cfg, std::vector<PathParam> paths) {
  PathSet set;
  set.paths = std::move(paths);
  set.gains.reserve(set.paths.size());
  set.losses.reserve(set.paths.size());
  for (const auto& p : set.paths) {
    const double beta = path_loss(cfg, p.rho, p.mu + p.d);
    set.losses.push_back(beta);
    set.gains.push_back(beta * std::polar(1.0, -cfg.wavenumber * (p.mu + p.d)));
  }
  return set;
}

void PathSet::validate(const ArrayConfig& cfg) const {
  if (paths.empty()) throw ConfigError("path set is empty");
  if (static_cast<int>(paths.size()) > cfg.n_antennas) {
    throw ConfigError("more paths than antennas");
  }
  if (gains.size() != paths.size() || losses.size() != paths.size()) {
    throw ConfigError("path set gains out of sync with paths");
  }
  for (std::size_t q = 0; q < paths.size(); ++q) {
    const auto& p = paths[q];
    if (!(p.mu > 0.0)) throw ConfigError("path mu must be positive");
    if (!(std::abs(p.theta) < kPi / 2.0)) throw ConfigError("path theta outside (-pi/2, pi/2)");
    if (!(p.d >= 0.0)) throw ConfigError("path d must be non-negative");
    if (!(p.rho > 0.0)) throw ConfigError("path rho must be positive");
    if (!(losses[q] > 0.0)) throw ConfigError("path loss must be positive");
  }
}

void ScenarioPrior::validate() const {
  if (gmm_means.empty()) throw ConfigError("prior needs at least one GMM mean");
  for (double m : gmm_means) {
    if (m < -1.0 || m > 1.0) throw ConfigError("GMM means must lie in [-1, 1]");
  }
  if (!(gmm_variance > 0.0)) throw ConfigError("GMM variance must be positive");
  if (!(mu_min > 0.0) || mu_max < mu_min) throw ConfigError("bad mu range");
  if (d_min < 0.0 || d_max < d_min) throw ConfigError("bad d range");
  if (q_min < 1 || q_max < q_min) throw ConfigError("bad path-count range");
  if (!(scatter_rho > 0.0)) throw ConfigError("scatter rho must be positive");
}

double rayleigh_distance(const ArrayConfig& cfg) {
  return 2.0 * cfg.aperture * cfg.aperture / cfg.wavelength;
}

CVec exact_channel(const ArrayConfig& cfg, const PathSet& paths) {
  const int n_ant = cfg.n_antennas;
  CVec h = CVec::Zero(n_ant);
  for (std::size_t q = 0; q < paths.size(); ++q) {
    const auto& p = paths.paths[q];
    const double s = std::sin(p.theta);
    // The carrier phase k (mu + d) is huge for far scatterers; factoring it
    // out and computing the element offset delta = last_hop - mu in the
    // cancellation-free form keeps the per-element phase accurate.
    const cplx common = std::polar(1.0, -cfg.wavenumber * (p.mu + p.d));
    for (int n = 0; n < n_ant; ++n) {
      const double x = n * cfg.spacing;
      const double radicand = p.mu * p.mu + x * x - 2.0 * p.mu * x * s;
      const double last_hop = std::sqrt(radicand);
      if (!(last_hop > cfg.spacing)) {
        throw DegenerateGeometry("scatterer " + std::to_string(q) + " within one spacing of element " +
                                 std::to_string(n));
      }
      const double delta = (x * x - 2.0 * p.mu * x * s) / (last_hop + p.mu);
      const double r = p.mu + p.d + delta;
      h[n] += path_loss(cfg, p.rho, r) * common * std::polar(1.0, -cfg.wavenumber * delta);
    }
  }
  return h;
}

CVec fresnel_channel(const ArrayConfig& cfg, const PathSet& paths) {
  const int n_ant = cfg.n_antennas;
  CVec h = CVec::Zero(n_ant);
  for (std::size_t q = 0; q < paths.size(); ++q) {
    const auto& p = paths.paths[q];
    const double s = std::sin(p.theta);
    for (int n = 0; n < n_ant; ++n) {
      const double x = n * cfg.spacing;
      const double phase = -cfg.wavenumber * (x * x / (2.0 * p.mu) - x * s);
      h[n] += paths.gains[q] * std::polar(1.0, phase);
    }
  }
  return h;
}

CVec generate_channel(const ArrayConfig& cfg, const PathSet& paths, ChannelKind kind) {
  return kind == ChannelKind::kExact ? exact_channel(cfg, paths) : fresnel_channel(cfg, paths);
}

PathSet sample_scenario(const ArrayConfig& cfg, const ScenarioPrior& prior, Rng& rng) {
  const int q_hi = std::min(prior.q_max, cfg.n_antennas);
  const int q_count = rng.uniform_int(prior.q_min, std::max(prior.q_min, q_hi));
  const double sd = std::sqrt(prior.gmm_variance);
  const int n_comp = static_cast<int>(prior.gmm_means.size());

  std::vector<PathParam> params;
  params.reserve(q_count);
  for (int q = 0; q < q_count; ++q) {
    const double mean = prior.gmm_means[rng.uniform_index(n_comp)];
    double phi = 0.0;
    do {
      phi = mean + sd * rng.normal();
    } while (!(phi > -1.0 && phi < 1.0));

    PathParam p;
    p.theta = std::asin(phi);
    p.mu = rng.uniform(prior.mu_min, prior.mu_max);
    if (q == 0 && prior.include_direct_path) {
      p.d = 0.0;
      p.rho = 1.0;
    } else {
      p.d = rng.uniform(prior.d_min, prior.d_max);
      p.rho = prior.scatter_rho;
    }
    params.push_back(p);
  }
  return PathSet::build(cfg, std::move(params));
}

}  // namespace nfcs
