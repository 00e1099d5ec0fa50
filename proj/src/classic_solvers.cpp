#include "nfcs/classic_solvers.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>

namespace nfcs {

namespace {

// lambda_max(Psi^H Psi) = lambda_max(Psi Psi^H); iterate on the smaller Gram.
double gram_lambda_max(const CMat& psi) {
  const CMat gram = psi.rows() <= psi.cols() ? CMat(psi * psi.adjoint()) : CMat(psi.adjoint() * psi);
  return max_eigenvalue(gram, 1e-14, 200000);
}

}  // namespace

SensingOperator::SensingOperator(const CMat& combiner, std::shared_ptr<const Dictionary> dictionary)
    : dictionary_(std::move(dictionary)) {
  if (!dictionary_) throw ConfigError("sensing operator needs a dictionary");
  psi_ = matmul(combiner, dictionary_->atoms);
  psi_h_ = psi_.adjoint();
  lambda_max_ = gram_lambda_max(psi_);
  if (!(lambda_max_ > 0.0)) throw ZeroSignal("sensing matrix is zero");
}

SensingOperator::SensingOperator(CMat psi) : psi_(std::move(psi)) {
  psi_h_ = psi_.adjoint();
  lambda_max_ = gram_lambda_max(psi_);
  if (!(lambda_max_ > 0.0)) throw ZeroSignal("sensing matrix is zero");
}

double SolverConfig::resolve_xi(const SensingOperator& op, const CVec& y) const {
  if (xi) return *xi;
  return xi_rel * (op.psi_h() * y).cwiseAbs().maxCoeff();
}

double SolverConfig::resolve_eta(const SensingOperator& op, const CVec& y) const {
  return resolve_xi(op, y) / op.lambda_max();
}

CVec soft_threshold(const CVec& z, double eta) {
  CVec out(z.size());
  for (Eigen::Index g = 0; g < z.size(); ++g) {
    const double mag = std::abs(z[g]);
    out[g] = mag > eta ? z[g] * (1.0 - eta / mag) : cplx(0.0, 0.0);
  }
  return out;
}

double lasso_objective(const SensingOperator& op, const CVec& y, const CVec& alpha, double xi) {
  const CVec r = y - matvec(op.psi(), alpha);
  return r.norm() + xi * alpha.cwiseAbs().sum();
}

double surrogate_objective(const SensingOperator& op, const CVec& y, const CVec& alpha, double xi) {
  const CVec r = y - matvec(op.psi(), alpha);
  return 0.5 * r.squaredNorm() + xi * alpha.cwiseAbs().sum();
}

SolverResult ista(const SensingOperator& op, const CVec& y, const SolverConfig& cfg) {
  if (y.size() != op.rows()) throw DimensionMismatch("ista: y length != Psi rows");
  const double xi = cfg.resolve_xi(op, y);
  const double step = 1.0 / op.lambda_max();
  const double eta = xi * step;
  SolverResult res;
  res.alpha = CVec::Zero(op.cols());
  res.objective_trace.reserve(cfg.iters);
  for (int t = 0; t < cfg.iters; ++t) {
    const CVec grad = op.psi_h() * (op.psi() * res.alpha - y);
    res.alpha = soft_threshold(res.alpha - step * grad, eta);
    res.objective_trace.push_back(surrogate_objective(op, y, res.alpha, xi));
  }
  return res;
}

double fista_momentum_next(double t) { return (1.0 + std::sqrt(1.0 + 4.0 * t * t)) / 2.0; }

SolverResult fista(const SensingOperator& op, const CVec& y, const SolverConfig& cfg) {
  if (y.size() != op.rows()) throw DimensionMismatch("fista: y length != Psi rows");
  const double xi = cfg.resolve_xi(op, y);
  const double step = 1.0 / op.lambda_max();
  const double eta = xi * step;
  SolverResult res;
  res.alpha = CVec::Zero(op.cols());
  res.objective_trace.reserve(cfg.iters);
  CVec point = res.alpha;  // extrapolated iterate
  double t = 1.0;
  for (int k = 0; k < cfg.iters; ++k) {
    const CVec grad = op.psi_h() * (op.psi() * point - y);
    CVec next = soft_threshold(point - step * grad, eta);
    const double t_next = fista_momentum_next(t);
    point = next + ((t - 1.0) / t_next) * (next - res.alpha);
    res.alpha = std::move(next);
    t = t_next;
    res.objective_trace.push_back(surrogate_objective(op, y, res.alpha, xi));
  }
  return res;
}

OmpResult omp(const SensingOperator& op, const CVec& y, const SolverConfig& cfg,
              std::optional<double> sigma2) {
  if (y.size() != op.rows()) throw DimensionMismatch("omp: y length != Psi rows");
  const CMat& psi = op.psi();
  const int g_count = op.cols();
  double tol = 0.0;
  if (cfg.residual_tol) {
    tol = *cfg.residual_tol;
  } else if (sigma2) {
    tol = std::sqrt(*sigma2) * std::sqrt(2.0 * op.rows());
  }
  int cap = cfg.sparsity_cap > 0 ? std::min(cfg.sparsity_cap, cfg.iters) : cfg.iters;
  // More atoms than measurements are linearly dependent.
  cap = std::min(cap, op.rows());
  const double y_norm = y.norm();

  Eigen::VectorXd col_norm(g_count);
  for (int g = 0; g < g_count; ++g) col_norm[g] = psi.col(g).norm();

  OmpResult res;
  res.alpha = CVec::Zero(g_count);
  std::vector<char> used(g_count, 0);
  CVec r = y;
  CVec coef;
  for (int it = 0; it < cfg.iters && static_cast<int>(res.selected.size()) < cap; ++it) {
    const double rn = r.norm();
    // The refit jitter leaves a residual near 1e-12 ||y|| inside the selected span.
    if (rn <= tol || rn <= 1e-10 * y_norm) break;

    const CVec corr = op.psi_h() * r;
    int best = -1;
    double best_score = 0.0;
    for (int g = 0; g < g_count; ++g) {
      if (used[g] || col_norm[g] == 0.0) continue;
      const double score = std::abs(corr[g]) / col_norm[g];
      if (score > best_score) {
        best_score = score;
        best = g;
      }
    }
    if (best < 0) break;
    used[best] = 1;
    res.selected.push_back(best);

    const auto k = static_cast<Eigen::Index>(res.selected.size());
    Eigen::MatrixXcd sub(psi.rows(), k);
    for (Eigen::Index j = 0; j < k; ++j) sub.col(j) = psi.col(res.selected[j]);
    Eigen::MatrixXcd normal = sub.adjoint() * sub;
    const double jitter = 1e-12 * normal.diagonal().real().maxCoeff();
    normal.diagonal().array() += jitter;
    Eigen::LLT<Eigen::MatrixXcd> llt(normal);
    if (llt.info() != Eigen::Success) {
      throw SingularRefit("least-squares refit failed with " + std::to_string(k) + " atoms");
    }
    const Eigen::MatrixXcd l = llt.matrixL();
    const double min_pivot = l.diagonal().real().minCoeff();
    if (min_pivot * min_pivot <= 10.0 * jitter) {
      throw SingularRefit("selected atoms are numerically dependent (" + std::to_string(k) + " atoms)");
    }
    coef = llt.solve(sub.adjoint() * y);
    r = y - sub * coef;
    res.residual_norms.push_back(r.norm());
  }
  for (std::size_t j = 0; j < res.selected.size(); ++j) res.alpha[res.selected[j]] = coef[j];
  return res;
}

CVec reconstruct_channel(const Dictionary& dict, const CVec& alpha) {
  return matvec(dict.atoms, alpha);
}

void write_trace_csv(const std::vector<double>& trace, std::ostream& out) {
  out << "iteration,objective\n";
  for (std::size_t i = 0; i < trace.size(); ++i) {
    out << i + 1 << ',' << std::setprecision(17) << trace[i] << "\n";
  }
}

}  // namespace nfcs
