#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "nfcs/classic_solvers.hpp"
#include "nfcs/measurement.hpp"
#include "support.hpp"

using namespace nfcs;
using nfcs::test::for_all;
using nfcs::test::random_cmat;
using nfcs::test::random_cvec;

namespace {

SolverConfig fixed_xi(int iters, double xi) {
  SolverConfig c;
  c.iters = iters;
  c.xi = xi;
  return c;
}

// Columns of a unitary matrix: exactly orthonormal atoms.
CMat orthonormal_columns(int n, int k, Rng& rng) {
  Eigen::HouseholderQR<Eigen::MatrixXcd> qr(Eigen::MatrixXcd(random_cmat(n, n, rng)));
  Eigen::MatrixXcd q = qr.householderQ();
  return q.leftCols(k);
}

}  // namespace

TEST_CASE("soft threshold: worked examples") {
  CVec z(4);
  z << cplx(3, 0), cplx(-3, 0), cplx(3, 4), cplx(0, 0);
  CHECK(soft_threshold(z, 0.0) == z);
  const CVec out = soft_threshold(z, 1.0);
  CHECK(std::abs(out[0] - cplx(2, 0)) < 1e-15);
  CHECK(std::abs(out[1] - cplx(-2, 0)) < 1e-15);
  CHECK(std::abs(out[2] - cplx(2.4, 3.2)) < 1e-15);
  CHECK(out[3] == cplx(0, 0));
  CHECK(soft_threshold(z, 10.0).isZero(0.0));
}

TEST_CASE("sensing operator") {
  Rng rng(1);
  const CMat psi = random_cmat(8, 16, rng);
  const SensingOperator op(psi);
  CHECK(op.psi_h() == psi.adjoint());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es{Eigen::MatrixXcd(psi.adjoint() * psi)};
  CHECK(op.lambda_max() == doctest::Approx(es.eigenvalues().maxCoeff()).epsilon(1e-6));
  CHECK_THROWS_AS(SensingOperator(CMat::Zero(3, 4)), ZeroSignal);

  const ArrayConfig cfg = ArrayConfig::make(16, 28e9);
  auto dict = std::make_shared<Dictionary>(build_spatial_dictionary(cfg, GridSpec{20, 2, 0.5}));
  const CombinerMatrix w = sample_combiner(cfg, 6, rng);
  const SensingOperator wa(w.w, dict);
  CHECK((wa.psi() - w.w * dict->atoms).norm() < 1e-12);
  CHECK(wa.dictionary() == dict.get());

  SolverConfig c;
  c.xi_rel = 0.2;
  const CVec y = random_cvec(8, rng);
  CHECK(c.resolve_xi(op, y) == doctest::Approx(0.2 * (psi.adjoint() * y).cwiseAbs().maxCoeff()));
  CHECK(c.resolve_eta(op, y) == doctest::Approx(c.resolve_xi(op, y) / op.lambda_max()));
  c.xi = 0.5;
  CHECK(c.resolve_xi(op, y) == 0.5);
}

TEST_CASE("lasso objective: examples and scalar oracle") {
  Rng rng(2);
  const CMat psi = random_cmat(8, 16, rng);
  const SensingOperator op(psi);
  const CVec y = random_cvec(8, rng);
  CHECK(lasso_objective(op, y, CVec::Zero(16), 0.3) == doctest::Approx(y.norm()).epsilon(1e-14));
  const CVec a = random_cvec(16, rng);
  CHECK(lasso_objective(op, psi * a, a, 0.0) < 1e-13);

  const double xi = 0.37;
  double res2 = 0.0, l1 = 0.0;
  for (int r = 0; r < 8; ++r) {
    double re = y[r].real(), im = y[r].imag();
    for (int g = 0; g < 16; ++g) {
      re -= psi(r, g).real() * a[g].real() - psi(r, g).imag() * a[g].imag();
      im -= psi(r, g).real() * a[g].imag() + psi(r, g).imag() * a[g].real();
    }
    res2 += re * re + im * im;
  }
  for (int g = 0; g < 16; ++g) l1 += std::hypot(a[g].real(), a[g].imag());
  CHECK(std::abs(lasso_objective(op, y, a, xi) - (std::sqrt(res2) + xi * l1)) < 1e-12);
  CHECK(std::abs(surrogate_objective(op, y, a, xi) - (0.5 * res2 + xi * l1)) < 1e-12 * (1 + res2));
}

TEST_CASE("ista: identity operator collapses to one soft threshold") {
  Rng rng(3);
  const SensingOperator op(CMat(CMat::Identity(6, 6)));
  const CVec y = random_cvec(6, rng);
  const SolverResult r = ista(op, y, fixed_xi(1, 0.4));
  CHECK((r.alpha - soft_threshold(y, 0.4)).norm() < 1e-15);
  REQUIRE(r.objective_trace.size() == 1u);
  const SolverResult f = fista(op, y, fixed_xi(50, 0.4));
  CHECK((f.alpha - soft_threshold(y, 0.4)).norm() < 1e-12);
}

TEST_CASE("ista: monotone trace and planted support") {
  Rng rng(4);
  for (int inst = 0; inst < 10; ++inst) {
    const CMat psi = random_cmat(16, 40, rng);
    const SensingOperator op(psi);
    const CVec y = random_cvec(16, rng);
    const SolverResult r = ista(op, y, SolverConfig{});
    REQUIRE(r.objective_trace.size() == 100u);
    for (std::size_t t = 1; t < r.objective_trace.size(); ++t) {
      CHECK(r.objective_trace[t] <= r.objective_trace[t - 1] * (1 + 1e-12));
    }
  }
  // Noiseless, planted 3-sparse code, small xi.
  const CMat psi = random_cmat(24, 48, rng);
  const SensingOperator op(psi);
  CVec a = CVec::Zero(48);
  a[5] = cplx(2, 1);
  a[19] = cplx(-1.5, 0.5);
  a[40] = cplx(0, 2);
  const SolverResult r = ista(op, psi * a, fixed_xi(3000, 1e-3));
  for (int g : {5, 19, 40}) CHECK(std::abs(r.alpha[g]) > 0.5);
}

TEST_CASE("ista: fixed points minimize the surrogate") {
  Rng rng(5);
  const CMat psi = random_cmat(10, 20, rng);
  const SensingOperator op(psi);
  const CVec y = random_cvec(10, rng);
  const double xi = 0.5;
  const CVec a = ista(op, y, fixed_xi(20000, xi)).alpha;
  const CVec next = ista(op, y, fixed_xi(20001, xi)).alpha;
  REQUIRE((a - next).norm() < 1e-12);
  // Subgradient optimality: |grad_g| <= xi off support, = xi with phase on support.
  const CVec grad = psi.adjoint() * (psi * a - y);
  for (int g = 0; g < 20; ++g) {
    if (a[g] == cplx(0, 0)) {
      CHECK(std::abs(grad[g]) <= xi * (1 + 1e-8));
    } else {
      CHECK(std::abs(grad[g] + xi * a[g] / std::abs(a[g])) < 1e-8);
    }
  }
  const double f0 = surrogate_objective(op, y, a, xi);
  for (int k = 0; k < 200; ++k) CHECK(surrogate_objective(op, y, a + 1e-3 * random_cvec(20, rng), xi) >= f0);
}

TEST_CASE("fista: momentum and head-to-head against ista") {
  CHECK(fista_momentum_next(1.0) == doctest::Approx((1 + std::sqrt(5.0)) / 2).epsilon(1e-15));
  Rng rng(6);
  for (int inst = 0; inst < 10; ++inst) {
    const SensingOperator op(random_cmat(16, 64, rng));
    const CVec y = random_cvec(16, rng);
    const SolverResult i = ista(op, y, SolverConfig{});
    const SolverResult f = fista(op, y, SolverConfig{});
    CHECK(f.objective_trace.back() <= i.objective_trace.back());
  }
}

TEST_CASE("omp: examples, exact recovery, residual decrease") {
  const SensingOperator id(CMat(CMat::Identity(8, 8)));
  CVec y = CVec::Zero(8);
  y[3] = 5.0;
  SolverConfig one;
  one.iters = 1;
  const OmpResult r1 = omp(id, y, one);
  // The refit carries a 1e-12 relative Tikhonov jitter.
  CHECK((r1.alpha - y).norm() < 1e-10);
  CHECK(r1.selected == std::vector<int>{3});

  Rng rng(7);
  const CMat psi = orthonormal_columns(32, 32, rng);
  const SensingOperator op(psi);
  CVec a = CVec::Zero(32);
  a[2] = cplx(1, 1);
  a[17] = cplx(-2, 0);
  a[30] = cplx(0.5, -0.7);
  SolverConfig three;
  three.iters = 3;
  three.residual_tol = 0.0;
  const OmpResult r = omp(op, psi * a, three);
  CHECK((r.alpha - a).norm() < 1e-8 * a.norm());

  const SensingOperator wide(random_cmat(16, 64, rng));
  SolverConfig ten;
  ten.iters = 10;
  ten.residual_tol = 0.0;
  const OmpResult rw = omp(wide, random_cvec(16, rng), ten);
  REQUIRE(rw.residual_norms.size() == 10u);
  for (std::size_t k = 1; k < rw.residual_norms.size(); ++k) {
    CHECK(rw.residual_norms[k] < rw.residual_norms[k - 1]);
  }
  CHECK(std::set<int>(rw.selected.begin(), rw.selected.end()).size() == rw.selected.size());

  SolverConfig capped = ten;
  capped.sparsity_cap = 4;
  CHECK(omp(wide, random_cvec(16, rng), capped).selected.size() == 4u);
  CHECK_THROWS_AS(omp(wide, random_cvec(5, rng), ten), DimensionMismatch);
}

TEST_CASE("omp: noise-aware stopping rule") {
  Rng rng(8);
  const SensingOperator op(random_cmat(16, 40, rng));
  const CVec y = random_cvec(16, rng);
  SolverConfig c;
  c.iters = 10;
  // A huge noise level stops before the first selection.
  CHECK(omp(op, y, c, 1e6).selected.empty());
  CHECK(omp(op, y, c).selected.size() == 10u);
}

TEST_CASE("reconstruct channel") {
  const ArrayConfig cfg = ArrayConfig::make(16, 28e9);
  const GridSpec grid{32, 4, 0.5};
  const Dictionary d = build_spatial_dictionary(cfg, grid);
  CHECK(reconstruct_channel(d, CVec::Zero(grid.size())).isZero(0.0));
  CHECK(reconstruct_channel(d, CVec::Unit(grid.size(), 37)) == d.atoms.col(37));

  const PathSet ps = PathSet::build(cfg, {PathParam{1.0 / grid.invdist_at(2), std::asin(grid.angle_at(9)), 0.0},
                                          PathParam{1.0 / grid.invdist_at(1), std::asin(grid.angle_at(22)), 3.0}});
  const CVec h = fresnel_channel(cfg, ps);
  const CVec hat = reconstruct_channel(d, quantize_paths(grid, cfg, ps).alpha);
  CHECK((hat - h).squaredNorm() / h.squaredNorm() < 1e-10);
}

TEST_CASE("trace csv") {
  std::ostringstream out;
  write_trace_csv({3.0, 2.5}, out);
  CHECK(out.str().rfind("iteration,objective\n", 0) == 0);
}

TEST_CASE("property: solvers never lose to the zero solution") {
  // ISTA and FISTA descend the squared surrogate, so that is the objective
  // compared here; the unsquared form can rise above its value at zero.
  int singular = 0;
  for_all(10000, 31, [&](Rng& rng, int i) {
    CAPTURE(i);
    const int m = rng.uniform_int(2, 6), g = rng.uniform_int(m, 12);
    const SensingOperator op(random_cmat(m, g, rng));
    const CVec y = random_cvec(m, rng);
    SolverConfig c;
    c.iters = rng.uniform_int(1, 8);
    c.xi_rel = 0.05 + 0.9 * rng.uniform();  // eta below max|Psi^H y| / lambda_max
    const double xi = c.resolve_xi(op, y);
    const double zero = surrogate_objective(op, y, CVec::Zero(g), xi);
    CHECK(surrogate_objective(op, y, ista(op, y, c).alpha, xi) <= zero * (1 + 1e-12));
    CHECK(surrogate_objective(op, y, fista(op, y, c).alpha, xi) <= zero * (1 + 1e-12));
    c.residual_tol = 0.0;
    try {
      const OmpResult o = omp(op, y, c);
      CHECK((y - op.psi() * o.alpha).norm() <= y.norm() * (1 + 1e-12));
      CHECK(std::set<int>(o.selected.begin(), o.selected.end()).size() == o.selected.size());
    } catch (const SingularRefit&) {
      ++singular;  // near-square random instances can select dependent atoms
    }
  });
  CHECK(singular < 100);
}
