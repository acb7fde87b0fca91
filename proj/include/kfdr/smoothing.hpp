#pragma once

#include <optional>
#include <span>
#include <vector>

#include "kfdr/basis.hpp"
#include "kfdr/parallel.hpp"

namespace kfdr {

/// Symmetric factorization of (H^T H + tau R). Falls back to a diagonal
/// jitter ladder (1e-12 .. 1e-6 times the largest diagonal entry) when the
/// plain factorization fails or is numerically rank deficient.
class PenalizedSolver {
 public:
  PenalizedSolver(const MatrixXd& HtH, const MatrixXd& R, double tau);

  MatrixXd solve(const MatrixXd& rhs) const { return llt_.solve(rhs); }
  double tau() const noexcept { return tau_; }
  /// Diagonal jitter that was added (0 when none was needed).
  double jitter() const noexcept { return jitter_; }

 private:
  Eigen::LLT<MatrixXd> llt_;
  double tau_;
  double jitter_ = 0.0;
};

/// Shared products for evaluating many smoothing parameters on one data set.
struct SmoothingProblem {
  SmoothingProblem(const MatrixXd& H, const MatrixXd& R, const MatrixXd& centered);

  const MatrixXd& H;
  const MatrixXd& R;
  const MatrixXd& centered;  // N x n_t, one centered curve per row
  MatrixXd HtH;
  MatrixXd HtY;  // n_b x N
};

/// Penalized least-squares coefficients, one column per curve:
/// C = (H^T H + tau R)^{-1} H^T Y^c.
MatrixXd fit_coefficients(const MatrixXd& H, const MatrixXd& R, double tau,
                          const MatrixXd& centered);

struct GcvTerms {
  double sse = 0.0;    // sum of squared residuals over all curves
  double trace = 0.0;  // trace of the smoother matrix S(tau)
  double value = 0.0;  // N / (N - trace)^2 * sse, +inf when N == trace
};

/// GCV(tau) = N / (N - trace S(tau))^2 * sum_i ||y_i^c - H c_i||^2 with N the
/// number of curves. trace S is computed as trace((H^T H + tau R)^{-1} H^T H).
GcvTerms gcv_terms(const SmoothingProblem& problem, double tau);
double gcv(double tau, const MatrixXd& H, const MatrixXd& R, const MatrixXd& centered);

/// tau_i = 10^(-6 + 12 (i - 1) / (n_tau - 1)), i = 1..n_tau.
std::vector<double> tau_grid(int n_tau);

struct TauSelection {
  std::vector<double> grid;
  std::vector<double> gcv;
  std::size_t best = 0;
  double tau = 0.0;
};

/// Grid minimizer of GCV over tau_grid(n_tau); ties go to the smaller tau.
TauSelection select_tau(const MatrixXd& H, const MatrixXd& R, const MatrixXd& centered,
                        int n_tau, Exec exec = kDefaultExec);

/// Generator of basis systems of a given size over a fixed interval.
struct BasisSpec {
  BasisKind kind = BasisKind::BSpline;
  double t0 = 0.0;
  double te = 1.0;
  int order = 4;

  BasisSystem make(int n_b) const;
  /// Smallest admissible count >= n_b (odd for Fourier, >= order for B-splines).
  int admissible(int n_b) const;
};

struct NbOptions {
  int n_b0 = 8;
  double delta_r = 0.05;
  int n_tau = 25;
  std::optional<double> tau_override;  // skips the GCV search when set
};

/// One round of the basis-count search.
struct NbRound {
  int n_b = 0;
  double tau = 0.0;
  double delta = 0.0;       // mean per-curve nrmse of the projection
  double rel_change = 0.0;  // |delta_prev - delta| / delta (NaN on the first round)
  bool stop = false;
};

struct NbSelection {
  int n_b = 0;
  double tau = 0.0;
  std::vector<NbRound> trace;
};

/// Mean over curves of nrmse_curve(y_i^c, H c_i); curves with zero range
/// contribute 0.
double projection_error(const MatrixXd& H, const MatrixXd& coeffs, const MatrixXd& centered);

/// Error-based basis-count search. Starting from n_b0, the count grows by
/// k * n_b0 in round k; each round re-selects tau by GCV (unless overridden)
/// and recomputes the mean projection error. Stops when the relative change
/// of consecutive errors drops below delta_r, or when the error is below
/// 1e-12 (nothing left to resolve). Throws if the count would exceed four
/// times the number of sample nodes.
NbSelection select_nb(const BasisSpec& spec, const MatrixXd& centered,
                      std::span<const double> nodes, const NbOptions& options,
                      Exec exec = kDefaultExec);

}  // namespace kfdr
