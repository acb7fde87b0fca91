#pragma once

#include <memory>
#include <optional>

#include "kfdr/basis.hpp"
#include "kfdr/smoothing.hpp"

namespace kfdr {

struct ReducerOptions {
  BasisKind kind = BasisKind::BSpline;
  int order = 4;
  /// Fit the even periodic extension of each curve (length 2 n_t - 2 over
  /// twice the interval). Intended for Fourier bases on non-periodic data.
  bool mirror = false;
  NbOptions nb;
  /// Skip the basis-count search and use this many functions.
  std::optional<int> n_b_fixed;
  double variance_threshold = 0.99;
};

/// Smallest m whose leading eigenvalues carry at least `threshold` of the
/// total. Eigenvalues must be sorted descending and non-negative; returns 0
/// for an all-zero spectrum.
int select_m(const VectorXd& eigenvalues, double threshold = 0.99);

/// Fitted functional dimension reduction.
///
/// Curves are centered, expanded in a penalized basis (coefficients C), and
/// the covariance operator is diagonalized through the symmetric problem
///   (N-1)^{-1} W^{1/2} C C^T W^{1/2} u = lambda u,   b = W^{-1/2} u.
/// The retained coordinates B = [b_1..b_m] satisfy B^T W B = I, and scores
/// are xi = B^T W c.
///
/// Scores use the W-weighted left inverse B^T W. It coincides with the exact
/// minimizer of the penalized latent fit only on the column space of B; the
/// exact minimizer would be (B^T (H^T H + tau R) B)^{-1} B^T H^T y.
class FunctionalReducer {
 public:
  /// Saved state sufficient to rebuild a reducer.
  struct State {
    TimeGrid grid{0.0, 1.0, 2};
    BasisKind kind = BasisKind::BSpline;
    int n_b = 0;
    int order = 4;
    bool mirror = false;
    double tau = 0.0;
    VectorXd mean_curve;
    VectorXd eigenvalues;
    MatrixXd B;  // n_b x m
  };

  static FunctionalReducer fit(const MatrixXd& responses, const TimeGrid& grid,
                               const ReducerOptions& options, Exec exec = kDefaultExec);
  static FunctionalReducer restore(const State& state);

  const State& state() const noexcept { return state_; }
  const TimeGrid& grid() const noexcept { return state_.grid; }
  const BasisSystem& basis() const noexcept { return *basis_; }
  double tau() const noexcept { return state_.tau; }
  int latent_dim() const noexcept { return static_cast<int>(state_.B.cols()); }
  const VectorXd& mean_curve() const noexcept { return state_.mean_curve; }
  const VectorXd& eigenvalues() const noexcept { return state_.eigenvalues; }
  const MatrixXd& B() const noexcept { return state_.B; }
  double variance_fraction() const;

  /// Basis matrices on the sample nodes (the extended nodes when mirrored).
  const MatrixXd& H() const noexcept { return H_; }
  const MatrixXd& R() const noexcept { return R_; }
  const MatrixXd& W() const noexcept { return W_; }
  const MatrixXd& W_half() const noexcept { return W_half_; }
  const VectorXd& sample_nodes() const noexcept { return nodes_; }

  /// H B restricted to the grid: reconstruct(xi) = mean + modes() xi.
  const MatrixXd& modes() const noexcept { return modes_; }
  /// eta(t)^T B at arbitrary times inside the basis interval.
  MatrixXd modes_at(std::span<const double> t) const;

  /// Scores of a new curve on the grid: xi = B^T W (H^T H + tau R)^{-1} H^T (y - mean).
  VectorXd project(const VectorXd& y) const;
  /// Row-wise project for an N x n_t matrix; returns N x m.
  MatrixXd project_rows(const MatrixXd& Y) const;
  /// mean + H B xi on the grid.
  VectorXd reconstruct(const VectorXd& xi) const;

  /// Quantities from the fit; empty after restore().
  const MatrixXd& coefficients() const noexcept { return C_; }
  const MatrixXd& training_scores() const noexcept { return scores_; }
  const NbSelection& selection() const noexcept { return selection_; }

 private:
  FunctionalReducer() = default;
  void build_operators();
  void build_maps();

  State state_;
  std::shared_ptr<const BasisSystem> basis_;
  VectorXd nodes_;
  MatrixXd H_, R_, W_, W_half_, W_half_inv_;
  MatrixXd projector_;  // m x n_t, folds mirroring into the grid
  MatrixXd modes_;      // n_t x m
  MatrixXd C_;
  MatrixXd scores_;
  NbSelection selection_;
};

}  // namespace kfdr
