#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "nfcs/dictionary.hpp"
#include "support.hpp"

using namespace nfcs;

TEST_CASE("steering vector: worked examples") {
  const ArrayConfig cfg = ArrayConfig::make(16, 28e9);
  const CVec broadside = steering_vector(cfg, kFarField, 0.0);
  for (int n = 0; n < 16; ++n) CHECK(std::abs(broadside[n] - cplx(1, 0)) < 1e-15);

  const CVec near = steering_vector(cfg, 3.0, 0.7);
  CHECK(std::abs(near[0] - cplx(1, 0)) < 1e-15);
  for (int n = 0; n < 16; ++n) CHECK(std::abs(std::abs(near[n]) - 1.0) < 1e-14);

  // lambda = 2 m, spacing 1 m, sin(theta) = 0.5: k = pi, phase of element n
  // is +pi n / 2, i.e. 1, j, -1, -j.
  const ArrayConfig four = ArrayConfig::make(4, kSpeedOfLight / 2.0, 1.0);
  const CVec a = steering_vector(four, kFarField, std::asin(0.5));
  const cplx expected[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
  for (int n = 0; n < 4; ++n) CHECK(std::abs(a[n] - expected[n]) < 1e-12);

  CHECK_THROWS_AS(steering_vector_phi(cfg, 0.0, 1.5), InvalidAngle);
  CHECK_THROWS_AS(steering_vector(cfg, 5.0, std::nan("")), InvalidAngle);
  CHECK_THROWS_AS(steering_vector(cfg, -1.0, 0.1), DegenerateGeometry);
}

TEST_CASE("steering vector matches the Fresnel channel of a unit-gain path") {
  const ArrayConfig cfg = ArrayConfig::make(64, 28e9);
  const PathSet ps = PathSet::build(cfg, {PathParam{9.0, -0.35, 0.0}});
  const CVec h = fresnel_channel(cfg, ps);
  const CVec a = steering_vector(cfg, 9.0, -0.35);
  CHECK((h - ps.gains[0] * a).norm() < 1e-12 * h.norm());
}

TEST_CASE("spatial dictionary: size, modulus, norms, determinism") {
  const ArrayConfig cfg = ArrayConfig::make(128, 28e9);
  const GridSpec grid;  // 256 x 8
  CHECK(grid.size() == 2048);
  const Dictionary d = build_spatial_dictionary(cfg, grid);
  CHECK(d.atoms.rows() == 128);
  CHECK(d.atoms.cols() == 2048);
  CHECK(d.grid.size() == 2048u);
  CHECK((d.atoms.cwiseAbs().array() - 1.0).abs().maxCoeff() < 1e-13);
  for (int g = 0; g < d.size(); g += 97) CHECK(d.atoms.col(g).norm() == doctest::Approx(std::sqrt(128.0)));
  CHECK(std::isinf(d.grid[grid.column(5, 0)].mu));
  CHECK(d.grid[grid.column(0, 7)].mu == doctest::Approx(2.0));
  CHECK(d.grid[grid.column(0, 0)].theta == doctest::Approx(-kPi / 2));
  CHECK(d.grid[grid.column(255, 0)].theta == doctest::Approx(kPi / 2));

  const Dictionary again = build_spatial_dictionary(cfg, grid);
  CHECK(again.atoms == d.atoms);

  GridSpec tiny{1, 1, 0.0};
  const Dictionary one = build_spatial_dictionary(ArrayConfig::make(8, 28e9), tiny);
  CHECK(one.size() == 1);
  for (int n = 0; n < 8; ++n) CHECK(one.atoms(n, 0) == cplx(1, 0));

  CHECK_THROWS_AS(build_spatial_dictionary(cfg, GridSpec{0, 4, 0.5}), ConfigError);
  CHECK_THROWS_AS(build_spatial_dictionary(cfg, GridSpec{8, 4, 0.0}), ConfigError);
}

TEST_CASE("quantize_paths: snapping and collisions") {
  const ArrayConfig cfg = ArrayConfig::make(32, 28e9);
  const GridSpec grid{64, 4, 0.3};
  const double phi = grid.angle_at(10) + 0.2 * grid.angle_step();
  const double inv = grid.invdist_at(2) - 0.3 * grid.invdist_step();
  const PathSet one = PathSet::build(cfg, {PathParam{1.0 / inv, std::asin(phi), 0.0}});
  const SparseCode c1 = quantize_paths(grid, cfg, one);
  REQUIRE(c1.support.size() == 1u);
  CHECK(c1.support[0] == grid.column(10, 2));
  CHECK(c1.alpha[grid.column(10, 2)] == one.gains[0]);
  CHECK(c1.alpha.cwiseAbs().sum() == doctest::Approx(std::abs(one.gains[0])));

  // Two paths in the same cell add up.
  const PathSet two = PathSet::build(cfg, {PathParam{1.0 / inv, std::asin(phi), 0.0},
                                           PathParam{1.0 / inv, std::asin(phi - 0.1 * grid.angle_step()), 4.0}});
  const SparseCode c2 = quantize_paths(grid, cfg, two);
  REQUIRE(c2.support.size() == 1u);
  CHECK(std::abs(c2.alpha[c2.support[0]] - (two.gains[0] + two.gains[1])) < 1e-18);
}

TEST_CASE("quantize_paths: exact inverse for on-grid Fresnel channels") {
  const ArrayConfig cfg = ArrayConfig::make(64, 28e9);
  const GridSpec grid{128, 4, 0.5};
  const Dictionary d = build_spatial_dictionary(cfg, grid);
  // Interior grid points only: the endpoints phi = +-1 are valid but sit at
  // theta = +-pi/2 where PathSet rejects them.
  const PathSet ps = PathSet::build(cfg, {PathParam{1.0 / grid.invdist_at(1), std::asin(grid.angle_at(20)), 0.0},
                                          PathParam{1.0 / grid.invdist_at(3), std::asin(grid.angle_at(77)), 6.0},
                                          PathParam{1.0 / grid.invdist_at(2), std::asin(grid.angle_at(100)), 1.0}});
  const SparseCode code = quantize_paths(grid, cfg, ps);
  CHECK(code.support.size() == 3u);
  const CVec h = fresnel_channel(cfg, ps);
  CHECK((d.atoms * code.alpha - h).norm() < 1e-10 * h.norm());
}

TEST_CASE("quantize_paths: quantization error shrinks as the angle grid refines") {
  const ArrayConfig cfg = ArrayConfig::make(64, 28e9);
  const ScenarioPrior prior;
  double prev = 1e9;
  for (int ga : {64, 128, 256, 512}) {
    const GridSpec grid{ga, 8, 0.5};
    const Dictionary d = build_spatial_dictionary(cfg, grid);
    Rng rng(17);
    double err = 0.0, ref = 0.0;
    for (int s = 0; s < 200; ++s) {
      const PathSet ps = sample_scenario(cfg, prior, rng);
      const CVec h = fresnel_channel(cfg, ps);
      err += (d.atoms * quantize_paths(grid, cfg, ps).alpha - h).squaredNorm();
      ref += h.squaredNorm();
    }
    CAPTURE(ga);
    CHECK(err / ref < prev);
    prev = err / ref;
  }
}

TEST_CASE("mutual coherence: small cases and brute-force oracle") {
  CHECK(mutual_coherence(CMat::Identity(5, 5)).value == 0.0);

  nfcs::Rng rng(4);
  CMat m = nfcs::test::random_cmat(6, 4, rng);
  m.col(3) = cplx(0, 2) * m.col(1);
  const CoherenceResult dup = mutual_coherence(m);
  CHECK(dup.value == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(dup.pair == std::make_pair(1, 3));

  for (int trial = 0; trial < 5; ++trial) {
    const CMat r = nfcs::test::random_cmat(8, 3 + trial * 70, rng);
    double best = -1.0;
    for (int t = 0; t < r.cols(); ++t) {
      for (int v = t + 1; v < r.cols(); ++v) {
        best = std::max(best, std::abs(r.col(t).dot(r.col(v))) / (r.col(t).norm() * r.col(v).norm()));
      }
    }
    const CoherenceResult res = mutual_coherence(r);
    CHECK(res.value == doctest::Approx(best).epsilon(1e-12));
    CHECK(column_coherence(r, res.pair.first, res.pair.second) == doctest::Approx(best).epsilon(1e-12));
  }

  CMat z = CMat::Identity(3, 3);
  z.col(1).setZero();
  CHECK_THROWS_AS(mutual_coherence(z), ZeroColumn);
  CHECK_THROWS_AS(mutual_coherence(CMat::Identity(3, 1)), DimensionMismatch);
}

TEST_CASE("coherence report: structure, global scan, CSV") {
  const ArrayConfig cfg = ArrayConfig::make(16, 28e9);
  const GridSpec grid{12, 3, 0.5};
  Rng rng(8);
  const CMat w = nfcs::test::random_cmat(6, 16, rng);
  const CoherenceReport rep = coherence_report(cfg, grid, w);

  // angle (G_a-1)G_d + distance G_a(G_d-1) + two diagonals (G_a-1)(G_d-1) + global.
  const std::size_t adjacent = 11 * 3 + 12 * 2 + 2 * 11 * 2;
  CHECK(rep.rows.size() == adjacent + 1);
  std::set<std::string> types;
  for (const auto& r : rep.rows) {
    CHECK(r.coherence >= 0.0);
    CHECK(r.coherence <= 1.0);
    CHECK(r.g1 < r.g2);
    types.insert(r.pair_type);
  }
  CHECK(types.size() == 5u);

  const CMat psi = w * build_spatial_dictionary(cfg, grid).atoms;
  CHECK(rep.global.coherence == doctest::Approx(mutual_coherence(psi).value).epsilon(1e-12));
  CHECK(rep.global.coherence >= rep.worst_adjacent.coherence);
  CHECK(rep.global_pairs_scanned == 36u * 35u / 2u);

  CoherenceOptions sampled;
  sampled.pair_budget = 50;
  sampled.seed = 3;
  const CoherenceReport rs = coherence_report(cfg, grid, w, sampled);
  CHECK(rs.global_pairs_scanned == 50u);
  CHECK(rs.global.coherence <= rep.global.coherence + 1e-12);

  REQUIRE(rep.thresholds.size() == 5u);
  for (const auto& t : rep.thresholds) {
    CHECK(t.threshold == doctest::Approx(1.0 / (2 * t.q - 1)));
    CHECK(t.adjacent_violates == (rep.worst_adjacent.coherence >= t.threshold));
  }

  std::ostringstream csv;
  rep.write_csv(csv);
  std::istringstream lines(csv.str());
  std::string line;
  std::getline(lines, line);
  CHECK(line.rfind("# worst_adjacent=", 0) == 0);
  std::getline(lines, line);
  CHECK(line == "pair_type,g1,g2,coherence");
  std::size_t count = 0;
  while (std::getline(lines, line)) ++count;
  CHECK(count == rep.rows.size());

  CHECK_THROWS_AS(coherence_report(cfg, grid, CMat::Identity(6, 6)), DimensionMismatch);
}

TEST_CASE("coherence report: far-field DFT grid is orthogonal") {
  // Half-wavelength array, phi on the half-open grid -1 + 2g/N: a DFT. The
  // closed grid used by build_spatial_dictionary steps by 2/(N-1) instead.
  const int n = 16;
  const ArrayConfig cfg = ArrayConfig::make(n, 28e9);
  CMat dft(n, n);
  for (int g = 0; g < n; ++g) dft.col(g) = steering_vector_phi(cfg, 0.0, -1.0 + 2.0 * g / n);
  CHECK(mutual_coherence(dft).value < 1e-12);
}

TEST_CASE("dictionary file round trip") {
  const ArrayConfig cfg = ArrayConfig::make(8, 28e9);
  const Dictionary d = build_spatial_dictionary(cfg, GridSpec{6, 2, 0.4});
  std::stringstream buf;
  write_dictionary(d, buf);
  const Dictionary back = read_dictionary(buf);
  CHECK(back.atoms == d.atoms);
  CHECK(back.source == DictionarySource::kSpatialGrid);
  REQUIRE(back.grid.size() == d.grid.size());
  for (std::size_t g = 0; g < d.grid.size(); ++g) {
    CHECK(back.grid[g].theta == d.grid[g].theta);
    CHECK(back.grid[g].mu == d.grid[g].mu);
  }

  Dictionary learned;
  learned.source = DictionarySource::kLearned;
  learned.atoms = CMat::Identity(3, 2);
  std::stringstream lb;
  write_dictionary(learned, lb);
  CHECK(read_dictionary(lb).source == DictionarySource::kLearned);

  std::stringstream bad("NOTADICT");
  CHECK_THROWS_AS(read_dictionary(bad), FormatError);
  CHECK_THROWS_AS(load_dictionary("/nonexistent/x.dict"), MissingArtifact);
}
