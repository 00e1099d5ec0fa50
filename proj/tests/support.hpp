#pragma once

#include <cmath>
#include <complex>

#include "nfcs/numerics.hpp"
#include "nfcs/unfolded.hpp"

namespace nfcs::test {

inline CVec random_cvec(Eigen::Index n, Rng& rng, double var = 1.0) {
  CVec v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = rng.complex_normal(var);
  return v;
}

inline CMat random_cmat(Eigen::Index rows, Eigen::Index cols, Rng& rng, double var = 1.0) {
  CMat m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.complex_normal(var);
  }
  return m;
}

inline Eigen::MatrixXcd random_batch(Eigen::Index rows, Eigen::Index cols, Rng& rng, double var = 1.0) {
  Eigen::MatrixXcd m(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c) {
    for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = rng.complex_normal(var);
  }
  return m;
}

inline double rel_err(double a, double b, double floor = 1e-12) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace nfcs::test

namespace nfcs::test {

// Runs prop(rng, i) for `cases` independently seeded cases; the case index
// is reported by doctest through the surrounding CAPTURE.
template <typename Prop>
void for_all(int cases, std::uint64_t seed, Prop prop) {
  for (int i = 0; i < cases; ++i) {
    Rng rng(stream_seed(seed, static_cast<std::uint64_t>(i)));
    prop(rng, i);
  }
}

inline ListaParams tiny_lista(Rng& rng, int g, int n_rf, int layers) {
  ListaParams p;
  for (int l = 0; l < layers; ++l) {
    p.va.push_back(random_cmat(g, g, rng, 1.0 / g));
    p.vb.push_back(random_cmat(g, n_rf, rng, 1.0 / n_rf));
    p.eta.push_back(rng.uniform(0.1, 0.4));
  }
  return p;
}

inline SdlListaParams tiny_sdl(Rng& rng, int n, int n_rf, int g, int layers) {
  SdlListaParams p;
  p.v = random_cmat(n, n_rf, rng, 1.0 / n_rf);
  p.va = random_cmat(g, n, rng, 1.0 / n);
  for (int l = 0; l < layers; ++l) {
    p.eta.push_back(rng.uniform(0.1, 0.4));
    p.kappa.push_back(rng.uniform(0.5, 1.5));
  }
  return p;
}

// Central differences on randomly chosen real coordinates of every tensor.
template <typename Params, typename LossFn>
double max_fd_error(Params& p, Params& grad, LossFn loss, Rng& rng, int coords) {
  auto pt = p.tensors();
  auto gt = grad.tensors();
  std::size_t total = 0;
  for (const auto& t : pt) total += t.count;
  double worst = 0.0;
  const double h = 1e-6;
  for (int c = 0; c < coords; ++c) {
    std::size_t k = rng.uniform_index(total);
    std::size_t ti = 0;
    while (k >= pt[ti].count) k -= pt[ti++].count;
    double& x = pt[ti].data[k];
    const double saved = x;
    x = saved + h;
    const double up = loss();
    x = saved - h;
    const double down = loss();
    x = saved;
    const double fd = (up - down) / (2.0 * h);
    worst = std::max(worst, rel_err(gt[ti].data[k], fd, 1e-6));
  }
  return worst;
}

}  // namespace nfcs::test
