#include "kfdr/basis.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "kfdr/error.hpp"

namespace kfdr {
namespace {

// 5-point Gauss-Legendre rule on [-1, 1]; exact for degree <= 9.
constexpr std::array<double, 5> kGaussNodes = {
    -0.9061798459386639927976269, -0.5384693101056830910363144, 0.0,
    0.5384693101056830910363144, 0.9061798459386639927976269};
constexpr std::array<double, 5> kGaussWeights = {
    0.2369268850561890875142640, 0.4786286704993664680412915, 0.5688888888888888888888889,
    0.4786286704993664680412915, 0.2369268850561890875142640};

}  // namespace

std::string to_string(BasisKind kind) {
  return kind == BasisKind::Fourier ? "fourier" : "bspline";
}

BasisKind parse_basis_kind(const std::string& s) {
  if (s == "fourier") return BasisKind::Fourier;
  if (s == "bspline") return BasisKind::BSpline;
  throw Error("basis", "unknown basis kind '" + s + "'");
}

BasisSystem BasisSystem::fourier(int n_b, double t0, double te) {
  if (n_b < 3 || n_b % 2 == 0) throw Error("basis", "Fourier basis needs an odd count >= 3");
  if (!(te > t0)) throw Error("basis", "basis interval requires te > t0");
  BasisSystem b;
  b.kind_ = BasisKind::Fourier;
  b.n_b_ = n_b;
  b.t0_ = t0;
  b.te_ = te;
  return b;
}

BasisSystem BasisSystem::bspline(int n_b, double t0, double te, int order) {
  if (order < 4) throw Error("basis", "B-spline order must be >= 4");
  if (n_b < order) throw Error("basis", "B-spline count must be >= order");
  if (!(te > t0)) throw Error("basis", "basis interval requires te > t0");
  BasisSystem b;
  b.kind_ = BasisKind::BSpline;
  b.n_b_ = n_b;
  b.t0_ = t0;
  b.te_ = te;
  b.order_ = order;
  const int degree = order - 1;
  const int intervals = n_b - degree;
  b.knots_.assign(static_cast<std::size_t>(n_b + order), t0);
  for (int i = 1; i < intervals; ++i)
    b.knots_[static_cast<std::size_t>(degree + i)] = t0 + (te - t0) * i / intervals;
  for (int i = n_b; i < n_b + order; ++i) b.knots_[static_cast<std::size_t>(i)] = te;
  return b;
}

double BasisSystem::checked(double t) const {
  const double slack = 1e-12 * (te_ - t0_);
  if (!(t >= t0_ - slack && t <= te_ + slack))
    throw Error("basis", "evaluation point outside the basis interval");
  return std::clamp(t, t0_, te_);
}

int BasisSystem::find_span(double t) const {
  const int degree = order_ - 1;
  if (t >= knots_[static_cast<std::size_t>(n_b_)]) return n_b_ - 1;
  // Largest i in [degree, n_b - 1] with knots[i] <= t.
  const auto first = knots_.begin() + degree;
  const auto last = knots_.begin() + n_b_;
  const auto it = std::upper_bound(first, last, t);
  return static_cast<int>(it - knots_.begin()) - 1;
}

int BasisSystem::local_bspline(double t, int derivs, MatrixXd& out) const {
  if (kind_ != BasisKind::BSpline) throw Error("basis", "local_bspline on a Fourier basis");
  t = checked(t);
  const int p = order_ - 1;
  const int span = find_span(t);
  const auto U = [&](int i) { return knots_[static_cast<std::size_t>(i)]; };

  // Triangular table of basis values and knot differences.
  MatrixXd ndu(order_, order_);
  std::vector<double> left(static_cast<std::size_t>(order_)), right(static_cast<std::size_t>(order_));
  ndu(0, 0) = 1.0;
  for (int j = 1; j <= p; ++j) {
    left[static_cast<std::size_t>(j)] = t - U(span + 1 - j);
    right[static_cast<std::size_t>(j)] = U(span + j) - t;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      ndu(j, r) = right[static_cast<std::size_t>(r + 1)] + left[static_cast<std::size_t>(j - r)];
      const double temp = ndu(r, j - 1) / ndu(j, r);
      ndu(r, j) = saved + right[static_cast<std::size_t>(r + 1)] * temp;
      saved = left[static_cast<std::size_t>(j - r)] * temp;
    }
    ndu(j, j) = saved;
  }

  derivs = std::min(derivs, p);
  out.setZero(derivs + 1, order_);
  for (int j = 0; j <= p; ++j) out(0, j) = ndu(j, p);

  MatrixXd a(2, order_);
  for (int r = 0; r <= p; ++r) {
    int s1 = 0;
    int s2 = 1;
    a(0, 0) = 1.0;
    for (int k = 1; k <= derivs; ++k) {
      double d = 0.0;
      const int rk = r - k;
      const int pk = p - k;
      if (r >= k) {
        a(s2, 0) = a(s1, 0) / ndu(pk + 1, rk);
        d = a(s2, 0) * ndu(rk, pk);
      }
      const int j1 = rk >= -1 ? 1 : -rk;
      const int j2 = (r - 1 <= pk) ? k - 1 : p - r;
      for (int j = j1; j <= j2; ++j) {
        a(s2, j) = (a(s1, j) - a(s1, j - 1)) / ndu(pk + 1, rk + j);
        d += a(s2, j) * ndu(rk + j, pk);
      }
      if (r <= pk) {
        a(s2, k) = -a(s1, k - 1) / ndu(pk + 1, r);
        d += a(s2, k) * ndu(r, pk);
      }
      out(k, r) = d;
      std::swap(s1, s2);
    }
  }
  double factor = p;
  for (int k = 1; k <= derivs; ++k) {
    out.row(k) *= factor;
    factor *= (p - k);
  }
  return span - p;
}

VectorXd BasisSystem::eval(double t) const {
  t = checked(t);
  VectorXd v = VectorXd::Zero(n_b_);
  if (kind_ == BasisKind::Fourier) {
    const double T = te_ - t0_;
    const double w = 2.0 * std::numbers::pi / T;
    const double amp = std::sqrt(2.0 / T);
    v[0] = 1.0 / std::sqrt(T);
    for (int k = 1; 2 * k < n_b_; ++k) {
      v[2 * k - 1] = amp * std::sin(k * w * (t - t0_));
      v[2 * k] = amp * std::cos(k * w * (t - t0_));
    }
    return v;
  }
  MatrixXd local;
  const int first = local_bspline(t, 0, local);
  v.segment(first, order_) = local.row(0).transpose();
  return v;
}

VectorXd BasisSystem::eval_d2(double t) const {
  t = checked(t);
  VectorXd v = VectorXd::Zero(n_b_);
  if (kind_ == BasisKind::Fourier) {
    const double T = te_ - t0_;
    const double w = 2.0 * std::numbers::pi / T;
    const double amp = std::sqrt(2.0 / T);
    for (int k = 1; 2 * k < n_b_; ++k) {
      const double kw2 = (k * w) * (k * w);
      v[2 * k - 1] = -kw2 * amp * std::sin(k * w * (t - t0_));
      v[2 * k] = -kw2 * amp * std::cos(k * w * (t - t0_));
    }
    return v;
  }
  MatrixXd local;
  const int first = local_bspline(t, 2, local);
  v.segment(first, order_) = local.row(2).transpose();
  return v;
}

std::vector<double> BasisSystem::breakpoints() const {
  if (kind_ == BasisKind::Fourier) return {t0_, te_};
  std::vector<double> b(knots_.begin() + (order_ - 1), knots_.begin() + n_b_ + 1);
  return b;
}

MatrixXd design_matrix(const BasisSystem& sys, std::span<const double> nodes) {
  const auto n_t = static_cast<Eigen::Index>(nodes.size());
  MatrixXd H = MatrixXd::Zero(n_t, sys.size());
  if (sys.kind() == BasisKind::Fourier) {
    for (Eigen::Index i = 0; i < n_t; ++i) H.row(i) = sys.eval(nodes[static_cast<std::size_t>(i)]).transpose();
    return H;
  }
  MatrixXd local;
  for (Eigen::Index i = 0; i < n_t; ++i) {
    const int first = sys.local_bspline(nodes[static_cast<std::size_t>(i)], 0, local);
    H.row(i).segment(first, sys.order()) = local.row(0);
  }
  return H;
}

MatrixXd design_matrix(const BasisSystem& sys, const TimeGrid& grid) {
  const VectorXd t = grid.nodes();
  return design_matrix(sys, std::span<const double>(t.data(), static_cast<std::size_t>(t.size())));
}

namespace {

// Integral over the interval of the outer product of derivative `deriv` of
// the B-splines, by Gauss-Legendre per knot interval.
MatrixXd bspline_product_integral(const BasisSystem& sys, int deriv) {
  const int n_b = sys.size();
  const int order = sys.order();
  MatrixXd M = MatrixXd::Zero(n_b, n_b);
  const auto bp = sys.breakpoints();
  MatrixXd local;
  for (std::size_t seg = 0; seg + 1 < bp.size(); ++seg) {
    const double a = bp[seg];
    const double b = bp[seg + 1];
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (a + b);
    for (std::size_t q = 0; q < kGaussNodes.size(); ++q) {
      const double t = mid + half * kGaussNodes[q];
      const int first = sys.local_bspline(t, deriv, local);
      const double w = half * kGaussWeights[q];
      for (int i = 0; i < order; ++i)
        for (int j = 0; j < order; ++j)
          M(first + i, first + j) += w * local(deriv, i) * local(deriv, j);
    }
  }
  return 0.5 * (M + M.transpose());
}

}  // namespace

MatrixXd roughness_matrix(const BasisSystem& sys) {
  if (sys.kind() == BasisKind::Fourier) {
    const double w = 2.0 * std::numbers::pi / (sys.te() - sys.t0());
    MatrixXd R = MatrixXd::Zero(sys.size(), sys.size());
    for (int k = 1; 2 * k < sys.size(); ++k) {
      const double kw = k * w;
      R(2 * k - 1, 2 * k - 1) = R(2 * k, 2 * k) = kw * kw * kw * kw;
    }
    return R;
  }
  return bspline_product_integral(sys, 2);
}

MatrixXd gram_matrix(const BasisSystem& sys) {
  MatrixXd W = sys.kind() == BasisKind::Fourier ? MatrixXd::Identity(sys.size(), sys.size())
                                                : bspline_product_integral(sys, 0);
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(W, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  if (!(lo > 1e-14 * hi)) throw Error("basis", "Gram matrix is numerically singular");
  return W;
}

BasisMatrices basis_matrices(const BasisSystem& sys, std::span<const double> nodes) {
  return {design_matrix(sys, nodes), roughness_matrix(sys), gram_matrix(sys)};
}

}  // namespace kfdr
