#pragma once

#include <iosfwd>
#include <memory>
#include <optional>
#include <vector>

#include "nfcs/dictionary.hpp"
#include "nfcs/numerics.hpp"

namespace nfcs {

// Psi = W A with the cached largest eigenvalue of Psi^H Psi.
class SensingOperator {
 public:
  SensingOperator(const CMat& combiner, std::shared_ptr<const Dictionary> dictionary);
  // Psi given directly (dictionary-free problems and tests).
  explicit SensingOperator(CMat psi);

  const CMat& psi() const { return psi_; }
  const CMat& psi_h() const { return psi_h_; }
  double lambda_max() const { return lambda_max_; }
  const Dictionary* dictionary() const { return dictionary_.get(); }
  int rows() const { return static_cast<int>(psi_.rows()); }
  int cols() const { return static_cast<int>(psi_.cols()); }

 private:
  CMat psi_;
  CMat psi_h_;
  double lambda_max_ = 0.0;
  std::shared_ptr<const Dictionary> dictionary_;
};

struct SolverConfig {
  int iters = 100;
  // Absolute l1 weight. Unset: xi_rel * max|Psi^H y| per instance.
  std::optional<double> xi;
  double xi_rel = 0.1;
  // OMP stops once ||r|| <= residual_tol. Unset: sigma * sqrt(2 N_RF) when
  // sigma2 is known, otherwise 0.
  std::optional<double> residual_tol;
  // OMP support cap; 0 means iters. Never more than the row count of Psi.
  int sparsity_cap = 0;

  double resolve_xi(const SensingOperator& op, const CVec& y) const;
  // eta = xi / lambda_max
  double resolve_eta(const SensingOperator& op, const CVec& y) const;
};

struct SolverResult {
  CVec alpha;
  // 0.5 ||y - Psi a||^2 + xi ||a||_1 after each iteration.
  std::vector<double> objective_trace;
};

// out_g = z_g max(1 - eta/|z_g|, 0)
CVec soft_threshold(const CVec& z, double eta);

// ||y - Psi a||_2 + xi ||a||_1 (unsquared data term).
double lasso_objective(const SensingOperator& op, const CVec& y, const CVec& alpha, double xi);

// 0.5 ||y - Psi a||_2^2 + xi ||a||_1, the function ISTA/FISTA descend.
double surrogate_objective(const SensingOperator& op, const CVec& y, const CVec& alpha, double xi);

SolverResult ista(const SensingOperator& op, const CVec& y, const SolverConfig& cfg);
SolverResult fista(const SensingOperator& op, const CVec& y, const SolverConfig& cfg);

// FISTA momentum t_{k+1} = (1 + sqrt(1 + 4 t_k^2)) / 2 with t_1 = 1.
double fista_momentum_next(double t);

struct OmpResult {
  CVec alpha;
  std::vector<int> selected;            // in selection order
  std::vector<double> residual_norms;   // ||r|| after each selection
};

OmpResult omp(const SensingOperator& op, const CVec& y, const SolverConfig& cfg,
              std::optional<double> sigma2 = std::nullopt);

CVec reconstruct_channel(const Dictionary& dict, const CVec& alpha);

void write_trace_csv(const std::vector<double>& trace, std::ostream& out);

}  // namespace nfcs
