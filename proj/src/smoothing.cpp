#include "kfdr/smoothing.hpp"

#include <cmath>
#include <limits>

#include "kfdr/error.hpp"

namespace kfdr {
namespace {

// Accept a Cholesky factor only if its smallest pivot is not swamped by
// rounding relative to the largest diagonal entry.
bool well_conditioned(const Eigen::LLT<MatrixXd>& llt, double max_diag) {
  if (llt.info() != Eigen::Success) return false;
  const VectorXd d = MatrixXd(llt.matrixLLT()).diagonal();
  const double min_pivot = d.minCoeff();
  return std::isfinite(min_pivot) && min_pivot * min_pivot > 1e-13 * max_diag;
}

}  // namespace

PenalizedSolver::PenalizedSolver(const MatrixXd& HtH, const MatrixXd& R, double tau) : tau_(tau) {
  if (!(tau >= 0.0)) throw Error("smoothing", "smoothing parameter must be non-negative");
  MatrixXd A = HtH + tau * R;
  const double max_diag = A.diagonal().cwiseAbs().maxCoeff();
  llt_.compute(A);
  if (well_conditioned(llt_, max_diag)) return;
  for (int e = -12; e <= -6; ++e) {
    const double j = std::pow(10.0, e) * max_diag;
    MatrixXd Aj = A;
    Aj.diagonal().array() += j;
    llt_.compute(Aj);
    if (llt_.info() == Eigen::Success) {
      const VectorXd d = MatrixXd(llt_.matrixLLT()).diagonal();
      if (d.minCoeff() * d.minCoeff() > 1e-13 * max_diag || e == -6) {
        jitter_ = j;
        return;
      }
    }
  }
  throw Error("smoothing", "penalized normal equations are singular (tau = " +
                               std::to_string(tau) + ", largest diagonal " +
                               std::to_string(max_diag) + ") even after jitter");
}

SmoothingProblem::SmoothingProblem(const MatrixXd& H_, const MatrixXd& R_, const MatrixXd& Y)
    : H(H_), R(R_), centered(Y) {
  if (Y.cols() != H.rows()) throw Error("smoothing", "curve length does not match H");
  if (R.rows() != H.cols() || R.cols() != H.cols())
    throw Error("smoothing", "roughness matrix size does not match H");
  HtH = H.transpose() * H;
  HtY = H.transpose() * Y.transpose();
}

MatrixXd fit_coefficients(const MatrixXd& H, const MatrixXd& R, double tau,
                          const MatrixXd& centered) {
  const SmoothingProblem problem(H, R, centered);
  return PenalizedSolver(problem.HtH, R, tau).solve(problem.HtY);
}

GcvTerms gcv_terms(const SmoothingProblem& p, double tau) {
  const PenalizedSolver solver(p.HtH, p.R, tau);
  const MatrixXd C = solver.solve(p.HtY);
  GcvTerms g;
  g.sse = (p.centered.transpose() - p.H * C).squaredNorm();
  g.trace = solver.solve(p.HtH).trace();
  const double n = static_cast<double>(p.centered.rows());
  const double denom = (n - g.trace) * (n - g.trace);
  g.value = denom > 0.0 ? n / denom * g.sse : std::numeric_limits<double>::infinity();
  return g;
}

double gcv(double tau, const MatrixXd& H, const MatrixXd& R, const MatrixXd& centered) {
  return gcv_terms(SmoothingProblem(H, R, centered), tau).value;
}

std::vector<double> tau_grid(int n_tau) {
  if (n_tau < 2) throw Error("smoothing", "tau grid needs at least 2 points");
  std::vector<double> grid(static_cast<std::size_t>(n_tau));
  for (int i = 0; i < n_tau; ++i)
    grid[static_cast<std::size_t>(i)] = std::pow(10.0, -6.0 + 12.0 * i / (n_tau - 1));
  return grid;
}

TauSelection select_tau(const MatrixXd& H, const MatrixXd& R, const MatrixXd& centered,
                        int n_tau, Exec exec) {
  TauSelection sel;
  sel.grid = tau_grid(n_tau);
  sel.gcv.resize(sel.grid.size());
  const SmoothingProblem problem(H, R, centered);
  for_each_index(exec, sel.grid.size(),
                 [&](std::size_t i) { sel.gcv[i] = gcv_terms(problem, sel.grid[i]).value; });
  sel.best = 0;
  for (std::size_t i = 1; i < sel.gcv.size(); ++i)
    if (sel.gcv[i] < sel.gcv[sel.best]) sel.best = i;
  sel.tau = sel.grid[sel.best];
  return sel;
}

BasisSystem BasisSpec::make(int n_b) const {
  return kind == BasisKind::Fourier ? BasisSystem::fourier(n_b, t0, te)
                                    : BasisSystem::bspline(n_b, t0, te, order);
}

int BasisSpec::admissible(int n_b) const {
  if (kind == BasisKind::Fourier) {
    n_b = std::max(n_b, 3);
    return n_b % 2 == 0 ? n_b + 1 : n_b;
  }
  return std::max(n_b, order);
}

double projection_error(const MatrixXd& H, const MatrixXd& coeffs, const MatrixXd& centered) {
  const MatrixXd fitted = (H * coeffs).transpose();
  double sum = 0.0;
  for (Eigen::Index i = 0; i < centered.rows(); ++i) {
    const double range = centered.row(i).maxCoeff() - centered.row(i).minCoeff();
    if (range > 0.0) sum += (centered.row(i) - fitted.row(i)).norm() / range;
  }
  return sum / static_cast<double>(centered.rows());
}

NbSelection select_nb(const BasisSpec& spec, const MatrixXd& centered,
                      std::span<const double> nodes, const NbOptions& options, Exec exec) {
  if (options.n_b0 < 2) throw Error("smoothing", "initial basis count must be >= 2");
  if (!(options.delta_r > 0.0)) throw Error("smoothing", "delta_r must be positive");
  if (static_cast<std::size_t>(centered.cols()) != nodes.size())
    throw Error("smoothing", "curve length does not match the sample nodes");
  const int n_b0 = spec.admissible(options.n_b0);
  const int limit = 4 * static_cast<int>(nodes.size());

  const auto round = [&](int n_b) {
    const BasisSystem sys = spec.make(n_b);
    const MatrixXd H = design_matrix(sys, nodes);
    const MatrixXd R = roughness_matrix(sys);
    const double tau = options.tau_override
                           ? *options.tau_override
                           : select_tau(H, R, centered, options.n_tau, exec).tau;
    const MatrixXd C = fit_coefficients(H, R, tau, centered);
    NbRound r;
    r.n_b = n_b;
    r.tau = tau;
    r.delta = projection_error(H, C, centered);
    r.rel_change = std::numeric_limits<double>::quiet_NaN();
    return r;
  };

  NbSelection out;
  int n_b = n_b0;
  out.trace.push_back(round(n_b));
  for (int k = 1;; ++k) {
    n_b = spec.admissible(n_b + k * n_b0);
    if (n_b > limit)
      throw Error("smoothing", "basis-count search did not converge before " +
                                   std::to_string(limit) + " functions");
    NbRound r = round(n_b);
    const double prev = out.trace.back().delta;
    if (r.delta < 1e-12) {
      r.rel_change = 0.0;
      r.stop = true;
    } else {
      r.rel_change = std::abs(prev - r.delta) / r.delta;
      r.stop = r.rel_change < options.delta_r;
    }
    out.trace.push_back(r);
    if (r.stop) break;
  }
  out.n_b = out.trace.back().n_b;
  out.tau = out.trace.back().tau;
  return out;
}

}  // namespace kfdr
