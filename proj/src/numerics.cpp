#include "nfcs/numerics.hpp"

#include <cmath>
#include <string>

namespace nfcs {

namespace {

std::string shape(Eigen::Index r, Eigen::Index c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

}  // namespace

CMat hermitian(const CMat& m) { return m.adjoint(); }

CVec matvec(const CMat& a, const CVec& x) {
  if (a.cols() != x.size()) {
    throw DimensionMismatch("matvec " + shape(a.rows(), a.cols()) + " * " +
                            std::to_string(x.size()));
  }
  return a * x;
}

CMat matmul(const CMat& a, const CMat& b) {
  if (a.cols() != b.rows()) {
    throw DimensionMismatch("matmul " + shape(a.rows(), a.cols()) + " * " +
                            shape(b.rows(), b.cols()));
  }
  return a * b;
}

double vecnorm2(const CVec& x) { return x.norm(); }

cplx inner_product(const CVec& a, const CVec& b) {
  if (a.size() != b.size()) {
    throw DimensionMismatch("inner_product " + std::to_string(a.size()) + " vs " +
                            std::to_string(b.size()));
  }
  // Fused multiply-adds leave ~1e-17 imaginary residue in x^H x.
  if (&a == &b) return {a.squaredNorm(), 0.0};
  return a.dot(b);  // Eigen's dot conjugates the left operand
}

bool all_finite(const CVec& x) { return x.allFinite(); }
bool all_finite(const CMat& m) { return m.allFinite(); }

double max_eigenvalue(const CMat& m, double tol, int max_iters) {
  if (m.rows() != m.cols()) {
    throw DimensionMismatch("max_eigenvalue needs a square matrix, got " +
                            shape(m.rows(), m.cols()));
  }
  const Eigen::Index n = m.rows();
  if (n == 0) throw DimensionMismatch("max_eigenvalue of an empty matrix");

  CVec v = CVec::Constant(n, cplx(1.0 / std::sqrt(static_cast<double>(n)), 0.0));
  double lambda = 0.0;
  double rel_change = 0.0;
  for (int it = 0; it < max_iters; ++it) {
    CVec w = m * v;
    const double next = v.dot(w).real();  // Rayleigh quotient, ||v|| = 1
    const double wn = w.norm();
    if (wn == 0.0) return 0.0;  // m v = 0 for the start vector of a PSD matrix
    v = w / wn;
    rel_change = next != 0.0 ? std::abs(next - lambda) / std::abs(next) : 0.0;
    lambda = next;
    if (it > 0 && rel_change <= tol) return lambda;
  }
  throw NonConvergence("power iteration: relative change " + std::to_string(rel_change) +
                       " > tol " + std::to_string(tol) + " after " +
                       std::to_string(max_iters) + " iterations");
}

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

std::uint64_t Rng::uniform_index(std::uint64_t n) {
  // Largest multiple of n representable; draws at or above it are rejected.
  const std::uint64_t limit = (~std::uint64_t{0}) - ((~std::uint64_t{0}) % n + 1) % n;
  for (;;) {
    const std::uint64_t x = engine_();
    if (x <= limit) return x % n;
  }
}

int Rng::uniform_int(int lo, int hi) {
  const auto span = static_cast<std::uint64_t>(static_cast<std::int64_t>(hi) - lo + 1);
  return lo + static_cast<int>(uniform_index(span));
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u = 0.0;
  double v = 0.0;
  double s = 0.0;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double f = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * f;
  has_spare_ = true;
  return u * f;
}

cplx Rng::complex_normal(double variance) {
  const double scale = std::sqrt(variance / 2.0);
  const double re = normal();
  const double im = normal();
  return {re * scale, im * scale};
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t stream_seed(std::uint64_t base, std::uint64_t index) {
  return splitmix64(splitmix64(base) + index);
}

}  // namespace nfcs
