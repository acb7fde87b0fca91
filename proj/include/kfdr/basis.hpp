#pragma once

#include <span>
#include <string>
#include <vector>

#include "kfdr/core.hpp"

namespace kfdr {

enum class BasisKind { Fourier, BSpline };

std::string to_string(BasisKind kind);
BasisKind parse_basis_kind(const std::string& s);

/// Fourier or B-spline basis over [t0, te]. Immutable after construction.
///
/// Fourier functions use the orthonormal scaling on T = te - t0,
/// w = 2 pi / T:
///   eta_1 = 1/sqrt(T), eta_{2k} = sqrt(2/T) sin(k w (t - t0)),
///   eta_{2k+1} = sqrt(2/T) cos(k w (t - t0)),
/// so the Gram matrix is exactly the identity.
///
/// B-splines are clamped with uniformly spaced interior knots; order is
/// degree + 1 (cubic = 4).
class BasisSystem {
 public:
  static BasisSystem fourier(int n_b, double t0, double te);
  static BasisSystem bspline(int n_b, double t0, double te, int order = 4);

  BasisKind kind() const noexcept { return kind_; }
  int size() const noexcept { return n_b_; }
  double t0() const noexcept { return t0_; }
  double te() const noexcept { return te_; }
  int order() const noexcept { return order_; }
  const std::vector<double>& knots() const noexcept { return knots_; }

  VectorXd eval(double t) const;
  VectorXd eval_d2(double t) const;

  /// Nonzero B-spline values (and derivatives up to `derivs`) at t: row k of
  /// `out` holds the k-th derivative of functions first..first+order-1.
  /// Returns `first`. Only valid for B-splines.
  int local_bspline(double t, int derivs, MatrixXd& out) const;

  /// Breakpoints of the piecewise structure (distinct knots for B-splines,
  /// the interval ends for Fourier).
  std::vector<double> breakpoints() const;

  bool operator==(const BasisSystem&) const = default;

 private:
  BasisSystem() = default;
  double checked(double t) const;
  int find_span(double t) const;

  BasisKind kind_ = BasisKind::Fourier;
  int n_b_ = 0;
  double t0_ = 0.0;
  double te_ = 1.0;
  int order_ = 0;
  std::vector<double> knots_;
};

/// H[i][j] = eta_j(t_i).
MatrixXd design_matrix(const BasisSystem& sys, std::span<const double> nodes);
MatrixXd design_matrix(const BasisSystem& sys, const TimeGrid& grid);

/// R[i][j] = integral of D2 eta_i D2 eta_j over the interval.
MatrixXd roughness_matrix(const BasisSystem& sys);

/// W[i][j] = integral of eta_i eta_j over the interval. Throws if W is
/// numerically singular.
MatrixXd gram_matrix(const BasisSystem& sys);

struct BasisMatrices {
  MatrixXd H;
  MatrixXd R;
  MatrixXd W;
};

BasisMatrices basis_matrices(const BasisSystem& sys, std::span<const double> nodes);

}  // namespace kfdr
