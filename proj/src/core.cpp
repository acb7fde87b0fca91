#include "kfdr/core.hpp"

#include <cmath>

#include "kfdr/error.hpp"

namespace kfdr {

TimeGrid::TimeGrid(double t0, double te, int n) : t0_(t0), te_(te), n_(n) {
  if (!(te > t0)) throw Error("core", "time grid requires te > t0");
  if (n < 2) throw Error("core", "time grid requires at least 2 nodes");
}

VectorXd TimeGrid::nodes() const {
  VectorXd t(n_);
  for (int j = 0; j < n_; ++j) t[j] = node(j);
  t[n_ - 1] = te_;
  return t;
}

void ResponseEnsemble::validate() const {
  if (inputs.rows() != responses.rows())
    throw Error("core", "inputs and responses have different row counts");
  if (responses.cols() != grid.size())
    throw Error("core", "response length does not match the time grid");
  if (!inputs.allFinite() || !responses.allFinite())
    throw Error("core", "ensemble contains non-finite entries");
  if (!input_names.empty() && static_cast<Eigen::Index>(input_names.size()) != inputs.cols())
    throw Error("core", "input name count does not match input dimension");
}

ResponseEnsemble ResponseEnsemble::subset(std::span<const std::size_t> rows) const {
  ResponseEnsemble out;
  out.grid = grid;
  out.input_names = input_names;
  out.inputs.resize(static_cast<Eigen::Index>(rows.size()), inputs.cols());
  out.responses.resize(static_cast<Eigen::Index>(rows.size()), responses.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.inputs.row(static_cast<Eigen::Index>(i)) = inputs.row(static_cast<Eigen::Index>(rows[i]));
    out.responses.row(static_cast<Eigen::Index>(i)) =
        responses.row(static_cast<Eigen::Index>(rows[i]));
  }
  return out;
}

CenteredData center_ensemble(const MatrixXd& responses) {
  if (responses.rows() == 0) throw Error("core", "cannot center an empty ensemble");
  CenteredData out;
  out.mean_curve = responses.colwise().mean().transpose();
  out.centered = responses.rowwise() - out.mean_curve.transpose();
  return out;
}

double nrmse_curve(const VectorXd& y, const VectorXd& y_hat) {
  if (y.size() != y_hat.size()) throw Error("core", "nrmse: length mismatch");
  const double range = y.maxCoeff() - y.minCoeff();
  if (!(range > 0.0)) throw Error("core", "nrmse: reference curve is constant");
  return (y - y_hat).norm() / range;
}

VectorXd curve_rms_errors(const MatrixXd& truth, const MatrixXd& pred) {
  if (truth.rows() != pred.rows() || truth.cols() != pred.cols())
    throw Error("core", "model_nrmse: shape mismatch");
  VectorXd e(truth.rows());
  const double n_t = static_cast<double>(truth.cols());
  for (Eigen::Index i = 0; i < truth.rows(); ++i) {
    const double range = truth.row(i).maxCoeff() - truth.row(i).minCoeff();
    if (!(range > 0.0)) throw Error("core", "model_nrmse: constant truth curve");
    e[i] = std::sqrt((truth.row(i) - pred.row(i)).squaredNorm() / n_t) / range;
  }
  return e;
}

double model_nrmse(const MatrixXd& truth, const MatrixXd& pred) {
  if (truth.rows() == 0) throw Error("core", "model_nrmse: empty set");
  return curve_rms_errors(truth, pred).mean();
}

MatrixXd latin_hypercube(int n, std::span<const std::pair<double, double>> bounds,
                         RandomSource& rng) {
  if (n < 1) throw Error("core", "latin_hypercube: n must be positive");
  const auto p = static_cast<Eigen::Index>(bounds.size());
  for (const auto& [lo, hi] : bounds)
    if (!(lo < hi)) throw Error("core", "latin_hypercube: lower bound must be below upper bound");
  MatrixXd x(n, p);
  for (Eigen::Index d = 0; d < p; ++d) {
    const auto perm = rng.permutation(static_cast<std::size_t>(n));
    const auto [lo, hi] = bounds[static_cast<std::size_t>(d)];
    for (int i = 0; i < n; ++i) {
      const double u = (static_cast<double>(perm[static_cast<std::size_t>(i)]) + rng.uniform()) / n;
      x(i, d) = lo + u * (hi - lo);
    }
  }
  return x;
}

VectorXd mirror_periodic(const VectorXd& curve) {
  const Eigen::Index n = curve.size();
  if (n < 2) throw Error("core", "mirror_periodic: need at least 2 samples");
  VectorXd out(2 * n - 2);
  out.head(n) = curve;
  for (Eigen::Index j = 0; j < n - 2; ++j) out[n + j] = curve[n - 2 - j];
  return out;
}

MatrixXd mirror_periodic_rows(const MatrixXd& curves) {
  const Eigen::Index n = curves.cols();
  if (n < 2) throw Error("core", "mirror_periodic: need at least 2 samples");
  MatrixXd out(curves.rows(), 2 * n - 2);
  out.leftCols(n) = curves;
  out.rightCols(n - 2) = curves.middleCols(1, n - 2).rowwise().reverse();
  return out;
}

}  // namespace kfdr
