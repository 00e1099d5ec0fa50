#pragma once

#include <complex>
#include <cstdint>
#include <random>

#include <Eigen/Dense>

#include "nfcs/errors.hpp"

namespace nfcs {

using cplx = std::complex<double>;

// Dense complex storage. Matrices are row-major; dimensions live in the
// Eigen object so storage length and shape can never disagree.
using CVec = Eigen::Matrix<cplx, Eigen::Dynamic, 1>;
using CMat = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RVec = Eigen::VectorXd;

CMat hermitian(const CMat& m);

CVec matvec(const CMat& a, const CVec& x);
CMat matmul(const CMat& a, const CMat& b);
double vecnorm2(const CVec& x);
// a^H b
cplx inner_product(const CVec& a, const CVec& b);

bool all_finite(const CVec& x);
bool all_finite(const CMat& m);

// Largest eigenvalue of a Hermitian positive semidefinite matrix by power
// iteration from the normalized all-ones vector. Throws NonConvergence when
// the relative change of the Rayleigh quotient is still above tol after
// max_iters steps.
double max_eigenvalue(const CMat& m, double tol = 1e-6, int max_iters = 1000);

// Seed of stream `index` under `base`: splitmix64(splitmix64(base) + index).
// Streams of different bases start at unrelated points, so sample seeds of
// two datasets never coincide the way base + index ranges can.
std::uint64_t stream_seed(std::uint64_t base, std::uint64_t index);

// Seedable stream with platform-stable draws.
//
// Raw bits come from std::mt19937_64, whose output sequence is fixed by the
// C++ standard. Distributions are implemented here rather than taken from
// <random>, because the standard leaves their algorithms to the vendor:
//   uniform()       53 high bits of one draw scaled by 2^-53, in [0, 1)
//   uniform_int()   rejection sampling on the raw 64-bit draw (no modulo bias)
//   normal()        Marsaglia polar method; the spare deviate is cached
//   complex_normal  (normal() + j normal()) * sqrt(var / 2), CN(0, var)
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  double uniform();
  double uniform(double lo, double hi);
  // Inclusive on both ends.
  int uniform_int(int lo, int hi);
  std::uint64_t uniform_index(std::uint64_t n);
  double normal();
  cplx complex_normal(double variance = 1.0);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace nfcs
