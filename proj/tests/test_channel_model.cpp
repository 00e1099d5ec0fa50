#include <doctest.h>

#include <cmath>

#include "nfcs/channel_model.hpp"
#include "support.hpp"

using namespace nfcs;
using nfcs::test::for_all;

namespace {

PathSet single(const ArrayConfig& cfg, double mu, double theta, double d = 0.0, double rho = 1.0) {
  return PathSet::build(cfg, {PathParam{mu, theta, d, rho}});
}

}  // namespace

TEST_CASE("array config derived quantities") {
  const ArrayConfig cfg = ArrayConfig::make(128, 28e9);
  CHECK(cfg.wavelength == doctest::Approx(kSpeedOfLight / 28e9).epsilon(1e-15));
  CHECK(cfg.spacing == doctest::Approx(cfg.wavelength / 2).epsilon(1e-15));
  CHECK(std::abs(cfg.wavenumber * cfg.wavelength - 2 * kPi) < 1e-12);
  CHECK(cfg.aperture == 128 * cfg.spacing);
  CHECK_THROWS_AS(ArrayConfig::make(1, 28e9), ConfigError);
  CHECK_THROWS_AS(ArrayConfig::make(8, -1.0), ConfigError);
}

TEST_CASE("rayleigh distance") {
  const ArrayConfig paper = ArrayConfig::make(128, 28e9);
  const double r = rayleigh_distance(paper);
  CHECK(r > 86.5);
  CHECK(r < 88.5);
  const ArrayConfig twice = ArrayConfig::make(256, 28e9);
  CHECK(rayleigh_distance(twice) == doctest::Approx(4 * r).epsilon(1e-14));
  // N=2, lambda=1 m, spacing 0.5 m -> D = 1, r = 2.
  const ArrayConfig unit = ArrayConfig::make(2, kSpeedOfLight, 0.5);
  CHECK(rayleigh_distance(unit) == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("path set gains and losses") {
  const ArrayConfig cfg = ArrayConfig::make(16, 28e9);
  const PathSet ps = single(cfg, 10.0, 0.2, 5.0, 2.0);
  const double beta = cfg.wavelength * std::sqrt(2.0) / (std::pow(4 * kPi, 1.5) * 15.0);
  CHECK(ps.losses[0] == doctest::Approx(beta).epsilon(1e-14));
  CHECK(std::abs(ps.gains[0] - std::polar(beta, -cfg.wavenumber * 15.0)) < 1e-14 * beta);
}

TEST_CASE("exact channel: element 0, far-field limit, linearity") {
  const ArrayConfig cfg = ArrayConfig::make(128, 28e9);
  const PathSet ps = single(cfg, 30.0, 0.4, 12.0);
  const CVec h = exact_channel(cfg, ps);
  CHECK(std::abs(h[0] - ps.gains[0]) < 1e-12 * std::abs(ps.gains[0]));

  const double far = 1e6 * rayleigh_distance(cfg);
  const CVec hf = exact_channel(cfg, single(cfg, far, 0.0));
  for (int n = 1; n < 128; ++n) CHECK(std::abs(std::arg(hf[n] / hf[0])) < 1e-3);

  const PathSet a = single(cfg, 15.0, -0.3, 0.0);
  const PathSet b = single(cfg, 40.0, 0.5, 20.0);
  const PathSet both = PathSet::build(cfg, {a.paths[0], b.paths[0]});
  const CVec sum = exact_channel(cfg, a) + exact_channel(cfg, b);
  CHECK((exact_channel(cfg, both) - sum).norm() < 1e-14 * sum.norm());
  CHECK((fresnel_channel(cfg, both) - fresnel_channel(cfg, a) - fresnel_channel(cfg, b)).norm() <
        1e-14 * sum.norm());
}

TEST_CASE("exact channel: per-element distance oracle") {
  const ArrayConfig cfg = ArrayConfig::make(32, 28e9);
  const double mu = 7.0, theta = -0.6, d = 3.0;
  const CVec h = exact_channel(cfg, single(cfg, mu, theta, d));
  for (int n = 0; n < 32; ++n) {
    // Element n sits at (n dd, 0); the scatterer at mu (sin theta, cos theta).
    const double x = n * cfg.spacing;
    const double dx = mu * std::sin(theta) - x, dy = mu * std::cos(theta);
    const double r = d + std::hypot(dx, dy);
    const cplx ref = cfg.wavelength / (std::pow(4 * kPi, 1.5) * r) * std::polar(1.0, -cfg.wavenumber * r);
    CHECK(std::abs(h[n] - ref) < 1e-9 * std::abs(ref));
  }
}

TEST_CASE("exact channel: magnitude follows path loss") {
  const ArrayConfig cfg = ArrayConfig::make(64, 28e9);
  const double mu = 5.0, theta = 0.7;
  const CVec h = exact_channel(cfg, single(cfg, mu, theta));
  std::vector<std::pair<double, double>> pts;
  for (int n = 0; n < 64; ++n) {
    const double x = n * cfg.spacing;
    pts.emplace_back(1.0 / std::sqrt(mu * mu + x * x - 2 * mu * x * std::sin(theta)), std::abs(h[n]));
  }
  std::sort(pts.begin(), pts.end());
  for (std::size_t i = 1; i < pts.size(); ++i) CHECK(pts[i].second >= pts[i - 1].second);
}

TEST_CASE("exact channel: degenerate geometry") {
  const ArrayConfig cfg = ArrayConfig::make(64, 28e9);
  // Scatterer on the array axis, right next to element 10.
  const double mu = 10 * cfg.spacing;
  CHECK_THROWS_AS(exact_channel(cfg, single(cfg, mu, kPi / 2 - 1e-9)), DegenerateGeometry);
}

TEST_CASE("fresnel channel") {
  const ArrayConfig cfg = ArrayConfig::make(128, 28e9);
  const PathSet two = PathSet::build(cfg, {PathParam{12.0, 0.1, 0.0}, PathParam{50.0, -0.4, 30.0}});
  const CVec h = fresnel_channel(cfg, two);
  CHECK(std::abs(h[0] - (two.gains[0] + two.gains[1])) < 1e-15);

  const PathSet far = single(cfg, 1e12, 0.3);
  const CVec hf = fresnel_channel(cfg, far);
  for (int n = 0; n < 128; ++n) {
    const cplx plane = far.gains[0] * std::polar(1.0, cfg.wavenumber * n * cfg.spacing * std::sin(0.3));
    CHECK(std::abs(hf[n] - plane) < 1e-9 * std::abs(plane));
  }
}

TEST_CASE("fresnel approximation error regression at mu=20 m, theta=0.3, N=128") {
  const ArrayConfig cfg = ArrayConfig::make(128, 28e9);
  const PathSet ps = single(cfg, 20.0, 0.3);
  const CVec he = exact_channel(cfg, ps);
  const double err = (fresnel_channel(cfg, ps) - he).norm() / he.norm();
  // Frozen from an independent NumPy evaluation of both models.
  CHECK(err == doctest::Approx(0.24162656060503526).epsilon(1e-9));
}

TEST_CASE("fresnel and exact agree far beyond the Rayleigh distance") {
  const ArrayConfig cfg = ArrayConfig::make(128, 28e9);
  const double r_ray = rayleigh_distance(cfg);
  // Broadside: the dropped term is third order in x/mu.
  for (double mu : {101 * r_ray, 500 * r_ray}) {
    const PathSet ps = single(cfg, mu, 0.0);
    const CVec he = exact_channel(cfg, ps), hf = fresnel_channel(cfg, ps);
    for (int n = 0; n < 128; ++n) CHECK(std::abs(hf[n] - he[n]) < 1e-6 * std::abs(he[n]));
  }
  // Off broadside the Fresnel phase misses k x^2 sin^2(theta) / (2 mu), so
  // agreement needs a far larger range.
  for (double theta : {-0.9, -0.3, 0.5, 1.2}) {
    const PathSet ps = single(cfg, 1e7 * r_ray, theta);
    const CVec he = exact_channel(cfg, ps), hf = fresnel_channel(cfg, ps);
    for (int n = 0; n < 128; ++n) CHECK(std::abs(hf[n] - he[n]) < 1e-6 * std::abs(he[n]));
  }
}

TEST_CASE("sample_scenario: determinism and ranges") {
  const ArrayConfig cfg = ArrayConfig::make(128, 28e9);
  const ScenarioPrior prior;
  Rng a(3), b(3);
  const PathSet pa = sample_scenario(cfg, prior, a), pb = sample_scenario(cfg, prior, b);
  REQUIRE(pa.size() == pb.size());
  for (std::size_t q = 0; q < pa.size(); ++q) {
    CHECK(pa.paths[q].mu == pb.paths[q].mu);
    CHECK(pa.paths[q].theta == pb.paths[q].theta);
    CHECK(pa.gains[q] == pb.gains[q]);
  }
}

TEST_CASE("property: sampled path sets satisfy their invariants") {
  const ArrayConfig cfg = ArrayConfig::make(128, 28e9);
  const ScenarioPrior prior;
  for_all(10000, 21, [&](Rng& rng, int i) {
    CAPTURE(i);
    const PathSet ps = sample_scenario(cfg, prior, rng);
    REQUIRE_NOTHROW(ps.validate(cfg));
    CHECK(ps.size() >= 2);
    CHECK(ps.size() <= 6);
    CHECK(ps.paths[0].d == 0.0);
    CHECK(ps.paths[0].rho == 1.0);
    for (const auto& p : ps.paths) {
      CHECK(p.mu >= 2.0);
      CHECK(p.mu <= 100.0);
      CHECK(p.d >= 0.0);
      CHECK(p.d <= 100.0);
      CHECK(std::abs(std::sin(p.theta)) < 1.0);
    }
  });
}

TEST_CASE("GMM prior: Monte-Carlo mean of phi") {
  const ArrayConfig cfg = ArrayConfig::make(128, 28e9);
  ScenarioPrior prior;
  prior.q_min = prior.q_max = 1;
  Rng rng(5);
  const int n = 100000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += std::sin(sample_scenario(cfg, prior, rng).paths[0].theta);
  // Independent oracle: the mixture mean after rejection to (-1, 1), by
  // numerical integration of each truncated component.
  const double sd = std::sqrt(prior.gmm_variance);
  double num = 0.0;
  for (double m : prior.gmm_means) {
    double mass = 0.0, first = 0.0;
    const int steps = 20000;
    for (int s = 0; s < steps; ++s) {
      const double x = -1.0 + (s + 0.5) * 2.0 / steps;
      const double w = std::exp(-0.5 * (x - m) * (x - m) / (sd * sd));
      mass += w;
      first += w * x;
    }
    num += first / mass;
  }
  const double truncated_mean = num / prior.gmm_means.size();
  CHECK(std::abs(sum / n - truncated_mean) < 0.02);
  // The untruncated mixture mean -0.07 lies within the same band.
  CHECK(std::abs(sum / n - (-0.07)) < 0.02);
}
