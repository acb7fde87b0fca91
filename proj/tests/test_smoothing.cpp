#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include "kfdr/basis.hpp"
#include "kfdr/error.hpp"
#include "kfdr/smoothing.hpp"

using namespace kfdr;

namespace {

// GCV from the explicit n_t x n_t smoother matrix.
double dense_gcv(const MatrixXd& H, const MatrixXd& R, const MatrixXd& Yc, double tau) {
  const MatrixXd A = H.transpose() * H + tau * R;
  const MatrixXd S = H * A.inverse() * H.transpose();
  double sse = 0.0;
  for (Eigen::Index i = 0; i < Yc.rows(); ++i) {
    const VectorXd y = Yc.row(i).transpose();
    sse += (y - S * y).squaredNorm();
  }
  const double N = static_cast<double>(Yc.rows());
  return N / std::pow(N - S.trace(), 2) * sse;
}

MatrixXd random_curves(int n, const TimeGrid& g, RandomSource& r) {
  MatrixXd Y(n, g.size());
  for (int i = 0; i < n; ++i) {
    const double a = r.normal(), b = r.normal(), c = r.uniform(1.0, 3.0);
    for (int j = 0; j < g.size(); ++j) {
      const double t = g.node(j);
      Y(i, j) = a * std::sin(c * t) + b * t * t + 0.05 * r.normal();
    }
  }
  return center_ensemble(Y).centered;
}

std::span<const double> span_of(const VectorXd& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

}  // namespace

TEST(Coefficients, RecoversSingleBasisFunction) {
  const auto b = BasisSystem::bspline(8, 0.0, 1.0);
  const TimeGrid g(0.0, 1.0, 40);
  const MatrixXd H = design_matrix(b, g);
  const MatrixXd R = roughness_matrix(b);
  MatrixXd Y = H.col(2).transpose();
  const MatrixXd C = fit_coefficients(H, R, 0.0, Y);
  VectorXd e2 = VectorXd::Zero(8);
  e2[2] = 1.0;
  EXPECT_LT((C.col(0) - e2).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Coefficients, InterpolatesWhenSquare) {
  const auto b = BasisSystem::bspline(9, 0.0, 1.0);
  const TimeGrid g(0.0, 1.0, 9);
  const MatrixXd H = design_matrix(b, g);
  RandomSource r(2);
  MatrixXd Y(3, 9);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 9; ++j) Y(i, j) = r.normal();
  const MatrixXd C = fit_coefficients(H, roughness_matrix(b), 0.0, Y);
  EXPECT_LT((H * C - Y.transpose()).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Coefficients, HeavyPenaltyGivesLineFit) {
  const auto b = BasisSystem::bspline(10, 0.0, 1.0);
  const TimeGrid g(0.0, 1.0, 50);
  const MatrixXd H = design_matrix(b, g);
  MatrixXd Y(1, 50);
  for (int j = 0; j < 50; ++j) Y(0, j) = std::exp(g.node(j));
  const MatrixXd C = fit_coefficients(H, roughness_matrix(b), 1e6, Y);
  // least-squares line oracle
  MatrixXd A(50, 2);
  A.col(0).setOnes();
  A.col(1) = g.nodes();
  const VectorXd line = A * A.colPivHouseholderQr().solve(Y.row(0).transpose());
  EXPECT_LT((H * C.col(0) - line).cwiseAbs().maxCoeff(), 1e-3);
}

TEST(Gcv, MatchesDenseSmootherOracle) {
  const auto b = BasisSystem::bspline(4, 0.0, 1.0);
  const TimeGrid g(0.0, 1.0, 6);
  RandomSource r(9);
  MatrixXd Y(5, 6);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 6; ++j) Y(i, j) = r.normal();
  const MatrixXd H = design_matrix(b, g);
  const MatrixXd R = roughness_matrix(b);
  for (double tau : {1e-6, 1e-3, 1.0, 10.0, 1e3}) {
    const double expect = dense_gcv(H, R, Y, tau);
    EXPECT_NEAR(gcv(tau, H, R, Y), expect, 1e-9 * expect) << tau;
  }
}

TEST(Gcv, TinyFourierProblemMatchesOracle) {
  // n_t = 4 nodes, n_b = 3 functions, two curves
  const auto f = BasisSystem::fourier(3, 0.0, 1.0);
  const TimeGrid g(0.0, 0.75, 4);
  MatrixXd Y(2, 4);
  Y << 1.0, -0.5, 0.25, 2.0, -1.0, 0.5, 0.0, 0.5;
  const MatrixXd H = design_matrix(f, g);
  const MatrixXd R = roughness_matrix(f);
  for (double tau : {0.0, 1e-4, 1e-2}) {
    const double expect = dense_gcv(H, R, Y, tau);
    const SmoothingProblem p(H, R, Y);
    const auto terms = gcv_terms(p, tau);
    if (std::isfinite(expect)) {
      EXPECT_NEAR(terms.value, expect, 1e-9 * std::abs(expect)) << tau;
    }
    EXPECT_NEAR(terms.trace, (H * (H.transpose() * H + tau * R).inverse() * H.transpose()).trace(), 1e-12);
  }
}

TEST(TauGrid, EndpointsAndSpacing) {
  const auto g = tau_grid(13);
  ASSERT_EQ(g.size(), 13u);
  EXPECT_DOUBLE_EQ(g.front(), 1e-6);
  EXPECT_DOUBLE_EQ(g.back(), 1e6);
  for (int i = 0; i < 13; ++i) EXPECT_NEAR(std::log10(g[i]), -6.0 + i, 1e-12);
  EXPECT_EQ(tau_grid(25).size(), 25u);
  EXPECT_THROW(tau_grid(1), Error);
}

TEST(SelectTau, IsExhaustiveArgminAndBeatsHeavySmoothing) {
  const TimeGrid g(0.0, 2.0, 60);
  RandomSource r(4);
  const MatrixXd Y = random_curves(12, g, r);
  const auto b = BasisSystem::bspline(20, 0.0, 2.0);
  const MatrixXd H = design_matrix(b, g);
  const MatrixXd R = roughness_matrix(b);
  const auto sel = select_tau(H, R, Y, 25, Exec::Serial);
  ASSERT_EQ(sel.gcv.size(), 25u);
  for (std::size_t i = 0; i < 25; ++i) {
    EXPECT_NEAR(sel.gcv[i], gcv(sel.grid[i], H, R, Y), 1e-12 * sel.gcv[i]);
    EXPECT_GE(sel.gcv[i], sel.gcv[sel.best]);
  }
  EXPECT_EQ(sel.tau, sel.grid[sel.best]);
  EXPECT_GT(gcv(1e6, H, R, Y), gcv(sel.tau, H, R, Y));
  const auto par = select_tau(H, R, Y, 25, Exec::Parallel);
  EXPECT_EQ(par.gcv, sel.gcv);
  EXPECT_EQ(par.best, sel.best);
}

TEST(SelectTau, TiesGoToTheSmallerTau) {
  // Fourier constant-only content: residual and trace do not depend on tau
  // for the constant function, and curves in its span give sse = 0.
  const TimeGrid g(0.0, 1.0, 10);
  MatrixXd Y = MatrixXd::Zero(3, 10);
  const auto f = BasisSystem::fourier(3, 0.0, 1.0);
  const auto sel = select_tau(design_matrix(f, g), roughness_matrix(f), Y, 7);
  EXPECT_EQ(sel.best, 0u);
  EXPECT_EQ(sel.tau, 1e-6);
}

TEST(Gcv, ConvexityOfSseAndMonotoneRoughness) {
  const TimeGrid g(0.0, 1.0, 80);
  RandomSource r(13);
  const MatrixXd Y = random_curves(6, g, r);
  const auto b = BasisSystem::bspline(25, 0.0, 1.0);
  const MatrixXd H = design_matrix(b, g);
  const MatrixXd R = roughness_matrix(b);
  const SmoothingProblem p(H, R, Y);
  double prev_sse = -1.0, prev_rough = std::numeric_limits<double>::infinity(), prev_trace = 1e9;
  const MatrixXd C0 = fit_coefficients(H, R, 1e-6, Y);
  const double rough_scale = (C0.transpose() * R * C0).trace();
  for (double tau : tau_grid(25)) {
    const auto t = gcv_terms(p, tau);
    const MatrixXd C = fit_coefficients(H, R, tau, Y);
    const double rough = (C.transpose() * R * C).trace();
    EXPECT_GE(t.sse, prev_sse * (1 - 1e-9));
    EXPECT_LE(rough, prev_rough + 1e-12 * rough_scale);
    // the system is ill-conditioned near tau = 1e6; trace round-off reaches ~1e-6
    EXPECT_LE(t.trace, prev_trace + 1e-5) << tau;
    prev_sse = t.sse;
    prev_rough = rough;
    prev_trace = t.trace;
  }
}

TEST(SelectNb, StopsOnSpanData) {
  // Curves in the span of the first five Fourier functions on [0, 100].
  const TimeGrid g(0.0, 100.0, 201);
  const auto f = BasisSystem::fourier(5, 0.0, 100.0);
  const MatrixXd H = design_matrix(f, g);
  RandomSource r(21);
  MatrixXd Y(8, 201);
  for (int i = 0; i < 8; ++i) {
    VectorXd c(5);
    for (int k = 0; k < 5; ++k) c[k] = r.normal();
    Y.row(i) = (H * c).transpose();
  }
  const MatrixXd Yc = center_ensemble(Y).centered;
  BasisSpec spec{BasisKind::Fourier, 0.0, 100.0, 4};
  NbOptions opt;
  opt.n_b0 = 5;
  const VectorXd nodes = g.nodes();
  const auto sel = select_nb(spec, Yc, span_of(nodes), opt);
  ASSERT_FALSE(sel.trace.empty());
  EXPECT_EQ(sel.trace.front().n_b, 5);
  EXPECT_LE(sel.trace.front().delta, 1e-6);
  EXPECT_TRUE(sel.trace.back().stop);
  EXPECT_EQ(sel.n_b, sel.trace.back().n_b);
}

TEST(SelectNb, GrowthScheduleAndStopRule) {
  const TimeGrid g(0.0, 2.0, 101);
  RandomSource r(8);
  const MatrixXd Y = random_curves(10, g, r);
  BasisSpec spec{BasisKind::BSpline, 0.0, 2.0, 4};
  NbOptions opt;
  opt.n_b0 = 6;
  opt.delta_r = 0.05;
  const VectorXd nodes = g.nodes();
  const auto sel = select_nb(spec, Y, span_of(nodes), opt, Exec::Serial);
  int expect = 6;
  for (std::size_t k = 0; k < sel.trace.size(); ++k) {
    const auto& round = sel.trace[k];
    EXPECT_EQ(round.n_b, expect) << k;
    expect = spec.admissible(round.n_b + static_cast<int>(k + 1) * 6);
    if (k == 0) {
      EXPECT_TRUE(std::isnan(round.rel_change));
    } else {
      const double d0 = sel.trace[k - 1].delta;
      EXPECT_NEAR(round.rel_change, std::abs(d0 - round.delta) / round.delta, 1e-12);
    }
    EXPECT_EQ(round.stop, k + 1 == sel.trace.size());
  }
  const auto& last = sel.trace.back();
  EXPECT_TRUE(last.rel_change < opt.delta_r || last.delta < 1e-12);
  const auto par = select_nb(spec, Y, span_of(nodes), opt, Exec::Parallel);
  EXPECT_EQ(par.n_b, sel.n_b);
  EXPECT_EQ(par.tau, sel.tau);
}

TEST(SelectNb, ConstantCurvesStopAfterOneComparison) {
  const TimeGrid g(0.0, 1.0, 30);
  const MatrixXd Y = MatrixXd::Zero(4, 30);
  BasisSpec spec{BasisKind::BSpline, 0.0, 1.0, 4};
  const VectorXd nodes = g.nodes();
  const auto sel = select_nb(spec, Y, span_of(nodes), NbOptions{});
  ASSERT_EQ(sel.trace.size(), 2u);
  EXPECT_EQ(sel.trace[0].n_b, 8);
  EXPECT_EQ(sel.n_b, 16);
  EXPECT_EQ(sel.trace[1].delta, 0.0);
  EXPECT_TRUE(sel.trace[1].stop);
}

TEST(SelectNb, ThrowsAtTheCountLimit) {
  const TimeGrid g(0.0, 1.0, 12);
  RandomSource r(3);
  MatrixXd Y(5, 12);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 12; ++j) Y(i, j) = r.normal();
  BasisSpec spec{BasisKind::BSpline, 0.0, 1.0, 4};
  NbOptions opt;
  opt.n_b0 = 4;
  opt.delta_r = 1e-15;
  opt.tau_override = 1.0;
  const VectorXd nodes = g.nodes();
  EXPECT_THROW(select_nb(spec, center_ensemble(Y).centered, span_of(nodes), opt), Error);
}

TEST(PenalizedSolver, JitterOnlyWhenNeeded) {
  const auto b = BasisSystem::bspline(8, 0.0, 1.0);
  const MatrixXd H = design_matrix(b, TimeGrid(0.0, 1.0, 40));
  const PenalizedSolver ok(H.transpose() * H, roughness_matrix(b), 1e-3);
  EXPECT_EQ(ok.jitter(), 0.0);
  // 3 nodes for 8 functions with no penalty: singular
  const MatrixXd H3 = design_matrix(b, TimeGrid(0.0, 1.0, 3));
  const PenalizedSolver fallback(H3.transpose() * H3, roughness_matrix(b), 0.0);
  EXPECT_GT(fallback.jitter(), 0.0);
}
