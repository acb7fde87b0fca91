#include "kfdr/fpca.hpp"

#include <cmath>

#include "kfdr/error.hpp"

namespace kfdr {
namespace {

struct SampleLayout {
  double t0;
  double te;
  VectorXd nodes;
};

// Basis interval and sample nodes. Mirrored curves live on twice the
// interval, sampled at the original step without the closing node.
SampleLayout layout(const TimeGrid& grid, bool mirror) {
  if (!mirror) return {grid.t0(), grid.te(), grid.nodes()};
  const int n = 2 * grid.size() - 2;
  VectorXd t(n);
  for (int j = 0; j < n; ++j) t[j] = grid.t0() + j * grid.step();
  return {grid.t0(), grid.t0() + 2.0 * (grid.te() - grid.t0()), t};
}

std::span<const double> as_span(const VectorXd& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

}  // namespace

int select_m(const VectorXd& eigenvalues, double threshold) {
  const double total = eigenvalues.sum();
  if (!(total > 0.0)) return 0;
  double running = 0.0;
  for (Eigen::Index k = 0; k < eigenvalues.size(); ++k) {
    running += eigenvalues[k];
    if (running / total >= threshold) return static_cast<int>(k + 1);
  }
  return static_cast<int>(eigenvalues.size());
}

double FunctionalReducer::variance_fraction() const {
  const double total = state_.eigenvalues.sum();
  if (!(total > 0.0)) return 1.0;
  return state_.eigenvalues.head(latent_dim()).sum() / total;
}

void FunctionalReducer::build_operators() {
  const SampleLayout lay = layout(state_.grid, state_.mirror);
  BasisSpec spec{state_.kind, lay.t0, lay.te, state_.order};
  basis_ = std::make_shared<const BasisSystem>(spec.make(state_.n_b));
  nodes_ = lay.nodes;
  H_ = design_matrix(*basis_, as_span(nodes_));
  R_ = roughness_matrix(*basis_);
  W_ = gram_matrix(*basis_);
  if (state_.kind == BasisKind::Fourier) {
    W_half_ = W_half_inv_ = MatrixXd::Identity(state_.n_b, state_.n_b);
  } else {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(W_);
    const VectorXd d = es.eigenvalues();
    const MatrixXd& V = es.eigenvectors();
    W_half_ = V * d.cwiseSqrt().asDiagonal() * V.transpose();
    W_half_inv_ = V * d.cwiseSqrt().cwiseInverse().asDiagonal() * V.transpose();
  }
}

FunctionalReducer FunctionalReducer::fit(const MatrixXd& responses, const TimeGrid& grid,
                                         const ReducerOptions& options, Exec exec) {
  if (responses.rows() < 2) throw Error("fpca", "functional reduction needs at least 2 curves");
  if (responses.cols() != grid.size()) throw Error("fpca", "curve length does not match grid");

  FunctionalReducer r;
  r.state_.grid = grid;
  r.state_.kind = options.kind;
  r.state_.order = options.order;
  r.state_.mirror = options.mirror;

  const CenteredData cd = center_ensemble(responses);
  r.state_.mean_curve = cd.mean_curve;
  const MatrixXd Y = options.mirror ? mirror_periodic_rows(cd.centered) : cd.centered;

  const SampleLayout lay = layout(grid, options.mirror);
  const BasisSpec spec{options.kind, lay.t0, lay.te, options.order};
  if (options.n_b_fixed) {
    const int n_b = spec.admissible(*options.n_b_fixed);
    const BasisSystem sys = spec.make(n_b);
    const MatrixXd H = design_matrix(sys, as_span(lay.nodes));
    const MatrixXd R = roughness_matrix(sys);
    const double tau = options.nb.tau_override
                           ? *options.nb.tau_override
                           : select_tau(H, R, Y, options.nb.n_tau, exec).tau;
    r.selection_.n_b = n_b;
    r.selection_.tau = tau;
  } else {
    r.selection_ = select_nb(spec, Y, as_span(lay.nodes), options.nb, exec);
  }
  r.state_.n_b = r.selection_.n_b;
  r.state_.tau = r.selection_.tau;
  r.build_operators();

  r.C_ = fit_coefficients(r.H_, r.R_, r.state_.tau, Y);

  const double scale = 1.0 / static_cast<double>(responses.rows() - 1);
  const MatrixXd WhC = r.W_half_ * r.C_;
  MatrixXd M = scale * (WhC * WhC.transpose());
  M = 0.5 * (M + M.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(M);
  if (es.info() != Eigen::Success) throw Error("fpca", "symmetric eigensolver failed");

  const Eigen::Index n_b = M.rows();
  VectorXd lambda = es.eigenvalues().reverse();
  MatrixXd U = es.eigenvectors().rowwise().reverse();
  const double lead = std::max(lambda[0], 0.0);
  // Variance at the round-off level of the data (e.g. identical curves after
  // centering) is treated as none.
  const double floor_amp = 1e-12 * responses.cwiseAbs().maxCoeff();
  const double floor = floor_amp * floor_amp * (lay.te - lay.t0);
  for (Eigen::Index k = 0; k < n_b; ++k) {
    if (lambda[k] < -1e-10 * lead && lead > floor)
      throw Error("fpca", "covariance eigenvalue significantly negative");
    if (lambda[k] <= floor) lambda[k] = 0.0;
  }
  r.state_.eigenvalues = lambda;

  const int m = select_m(lambda, options.variance_threshold);
  MatrixXd B = r.W_half_inv_ * U.leftCols(m);
  for (int k = 0; k < m; ++k) {
    Eigen::Index arg = 0;
    B.col(k).cwiseAbs().maxCoeff(&arg);
    if (B(arg, k) < 0.0) B.col(k) *= -1.0;
  }
  r.state_.B = B;
  r.scores_ = (B.transpose() * r.W_ * r.C_).transpose();

  r.build_maps();
  return r;
}

FunctionalReducer FunctionalReducer::restore(const State& state) {
  FunctionalReducer r;
  r.state_ = state;
  if (state.B.rows() != state.n_b) throw Error("fpca", "stored B does not match basis size");
  if (state.mean_curve.size() != state.grid.size())
    throw Error("fpca", "stored mean curve does not match grid");
  r.build_operators();
  r.build_maps();
  return r;
}

void FunctionalReducer::build_maps() {
  const int n_t = state_.grid.size();
  modes_ = H_.topRows(n_t) * state_.B;
  if (latent_dim() == 0) {
    projector_.resize(0, n_t);
    return;
  }
  const PenalizedSolver solver(H_.transpose() * H_, R_, state_.tau);
  // P = B^T W A^{-1} H^T (m x n_nodes); A is symmetric so P^T = H A^{-1} W B.
  const MatrixXd P = (H_ * solver.solve(W_ * state_.B)).transpose();
  if (!state_.mirror) {
    projector_ = P;
    return;
  }
  // Mirrored node j carries y_j for j < n_t and y_{2 n_t - 2 - j} after that.
  projector_ = P.leftCols(n_t);
  for (Eigen::Index j = n_t; j < P.cols(); ++j) projector_.col(2 * n_t - 2 - j) += P.col(j);
}

MatrixXd FunctionalReducer::modes_at(std::span<const double> t) const {
  return design_matrix(*basis_, t) * state_.B;
}

VectorXd FunctionalReducer::project(const VectorXd& y) const {
  if (y.size() != state_.grid.size()) throw Error("fpca", "project: curve length mismatch");
  return projector_ * (y - state_.mean_curve);
}

MatrixXd FunctionalReducer::project_rows(const MatrixXd& Y) const {
  if (Y.cols() != state_.grid.size()) throw Error("fpca", "project: curve length mismatch");
  return (Y.rowwise() - state_.mean_curve.transpose()) * projector_.transpose();
}

VectorXd FunctionalReducer::reconstruct(const VectorXd& xi) const {
  if (xi.size() != latent_dim()) throw Error("fpca", "reconstruct: score length mismatch");
  return state_.mean_curve + modes_ * xi;
}

}  // namespace kfdr
