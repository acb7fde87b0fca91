#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "kfdr/random.hpp"

namespace kfdr {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Uniform time grid t_j = t0 + j (te - t0) / (n - 1), j = 0..n-1.
class TimeGrid {
 public:
  TimeGrid(double t0, double te, int n);

  double t0() const noexcept { return t0_; }
  double te() const noexcept { return te_; }
  int size() const noexcept { return n_; }
  double step() const noexcept { return (te_ - t0_) / (n_ - 1); }
  double node(int j) const noexcept { return t0_ + j * step(); }
  VectorXd nodes() const;

  bool operator==(const TimeGrid&) const = default;

 private:
  double t0_;
  double te_;
  int n_;
};

/// N input samples paired with N response curves on a shared grid.
/// Row i of `inputs` produced row i of `responses`.
struct ResponseEnsemble {
  MatrixXd inputs;     // N x p
  MatrixXd responses;  // N x n_t
  TimeGrid grid{0.0, 1.0, 2};
  std::vector<std::string> input_names;

  int size() const noexcept { return static_cast<int>(responses.rows()); }
  int dims() const noexcept { return static_cast<int>(inputs.cols()); }

  /// Throws kfdr::Error on shape mismatch or non-finite entries.
  void validate() const;
  /// Rows selected by index, in the given order.
  ResponseEnsemble subset(std::span<const std::size_t> rows) const;
};

struct CenteredData {
  VectorXd mean_curve;  // n_t
  MatrixXd centered;    // N x n_t
};

/// Subtract the column mean (the pointwise mean curve) from every row.
CenteredData center_ensemble(const MatrixXd& responses);

/// ||y - y_hat||_2 / (max y - min y). No 1/sqrt(n) factor; this is the
/// per-curve error used inside basis-count selection.
double nrmse_curve(const VectorXd& y, const VectorXd& y_hat);

/// Mean over curves (rows) of RMS(y_i - y_hat_i) / range(y_i). This is the
/// test-set error metric.
double model_nrmse(const MatrixXd& truth, const MatrixXd& pred);

/// Per-curve terms of model_nrmse, in row order.
VectorXd curve_rms_errors(const MatrixXd& truth, const MatrixXd& pred);

/// Latin hypercube design: per dimension exactly one point in each of the
/// n equal-width strata of [lower, upper].
MatrixXd latin_hypercube(int n, std::span<const std::pair<double, double>> bounds,
                         RandomSource& rng);

/// [y_1..y_n, y_{n-1}..y_2]: one period (length 2n - 2) of the even periodic
/// extension of the curve, without duplicated endpoints.
VectorXd mirror_periodic(const VectorXd& curve);

/// Row-wise mirror_periodic.
MatrixXd mirror_periodic_rows(const MatrixXd& curves);

}  // namespace kfdr
