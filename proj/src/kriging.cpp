#include "kfdr/kriging.hpp"

#include <gsl/gsl_multimin.h>
#include <gsl/gsl_vector.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <utility>
#include <vector>

#include "kfdr/error.hpp"

namespace kfdr {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Squared coordinate differences, one N x N matrix per input dimension, so a
// kernel matrix costs p multiply-adds and one exp per entry.
struct PairwiseSquares {
  explicit PairwiseSquares(const MatrixXd& X) : n(X.rows()) {
    dims.reserve(static_cast<std::size_t>(X.cols()));
    for (Eigen::Index d = 0; d < X.cols(); ++d) {
      MatrixXd D(n, n);
      for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index i = 0; i < n; ++i) {
          const double diff = X(i, d) - X(j, d);
          D(i, j) = diff * diff;
        }
      dims.push_back(std::move(D));
    }
  }

  MatrixXd kernel(const KrigingHyper& h) const {
    MatrixXd K(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
      K(j, j) = h.sigma_z2 + h.sigma_n2;
      for (Eigen::Index i = j + 1; i < n; ++i) {
        double s = 0.0;
        for (std::size_t d = 0; d < dims.size(); ++d) s += h.theta[static_cast<Eigen::Index>(d)] * dims[d](i, j);
        K(i, j) = h.sigma_z2 * std::exp(-s);
      }
    }
    return K;
  }

  Eigen::Index n;
  std::vector<MatrixXd> dims;
};

struct Likelihood {
  double value = kNegInf;
  double mu = 0.0;
};

// Profiled log likelihood from the lower triangle of A = K + sigma_n2 I.
Likelihood profiled_likelihood(const MatrixXd& A_lower, const VectorXd& y) {
  Eigen::LLT<MatrixXd> llt(A_lower);
  if (llt.info() != Eigen::Success) return {};
  const Eigen::Index n = y.size();
  const VectorXd ones = VectorXd::Ones(n);
  const VectorXd a1 = llt.solve(ones);
  const VectorXd ay = llt.solve(y);
  const double denom = ones.dot(a1);
  if (!(denom > 0.0) || !std::isfinite(denom)) return {};
  Likelihood out;
  out.mu = ones.dot(ay) / denom;
  const VectorXd r = y - out.mu * ones;
  const double quad = r.dot(llt.solve(r));
  const double logdet = 2.0 * MatrixXd(llt.matrixL()).diagonal().array().log().sum();
  out.value = -0.5 * quad - 0.5 * logdet - 0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
  if (!std::isfinite(out.value)) out.value = kNegInf;
  return out;
}

struct SearchSpace {
  int p;
  bool fit_nugget;
  double fixed_nugget;
  VectorXd lo;
  VectorXd hi;

  int size() const { return static_cast<int>(lo.size()); }

  KrigingHyper decode(const VectorXd& z) const {
    KrigingHyper h;
    h.theta.resize(p);
    for (int d = 0; d < p; ++d) h.theta[d] = std::pow(10.0, std::clamp(z[d], lo[d], hi[d]));
    h.sigma_z2 = std::pow(10.0, std::clamp(z[p], lo[p], hi[p]));
    h.sigma_n2 = fit_nugget ? std::pow(10.0, std::clamp(z[p + 1], lo[p + 1], hi[p + 1])) : fixed_nugget;
    return h;
  }
};

struct Objective {
  const PairwiseSquares* pairs;
  const VectorXd* y;
  const SearchSpace* space;
  int evaluations = 0;

  double operator()(const VectorXd& z) {
    ++evaluations;
    const Likelihood l = profiled_likelihood(pairs->kernel(space->decode(z)), *y);
    return std::isfinite(l.value) ? -l.value : 1e300;
  }
};

double gsl_objective(const gsl_vector* v, void* params) {
  auto* obj = static_cast<Objective*>(params);
  VectorXd z(static_cast<Eigen::Index>(v->size));
  for (std::size_t i = 0; i < v->size; ++i) z[static_cast<Eigen::Index>(i)] = gsl_vector_get(v, i);
  return (*obj)(z);
}

struct StartResult {
  VectorXd z;
  double value = 1e300;
};

StartResult nelder_mead(Objective& obj, const VectorXd& start, const VectorXd& steps, int budget) {
  const auto n = static_cast<std::size_t>(start.size());
  using VecPtr = std::unique_ptr<gsl_vector, decltype(&gsl_vector_free)>;
  using MinPtr = std::unique_ptr<gsl_multimin_fminimizer, decltype(&gsl_multimin_fminimizer_free)>;
  VecPtr x(gsl_vector_alloc(n), &gsl_vector_free);
  VecPtr ss(gsl_vector_alloc(n), &gsl_vector_free);
  for (std::size_t i = 0; i < n; ++i) {
    gsl_vector_set(x.get(), i, start[static_cast<Eigen::Index>(i)]);
    gsl_vector_set(ss.get(), i, steps[static_cast<Eigen::Index>(i)]);
  }
  gsl_multimin_function f{&gsl_objective, n, &obj};
  MinPtr s(gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, n),
           &gsl_multimin_fminimizer_free);
  gsl_multimin_fminimizer_set(s.get(), &f, x.get(), ss.get());
  while (obj.evaluations < budget) {
    if (gsl_multimin_fminimizer_iterate(s.get()) != GSL_SUCCESS) break;
    if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(s.get()), 1e-5) == GSL_SUCCESS) break;
  }
  StartResult r;
  r.z.resize(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) r.z[static_cast<Eigen::Index>(i)] = gsl_vector_get(s->x, i);
  r.value = s->fval;
  return r;
}

}  // namespace

InputScaling InputScaling::from_data(const MatrixXd& X) {
  if (X.rows() == 0) throw Error("kriging", "cannot scale an empty input set");
  InputScaling s;
  s.lower = X.colwise().minCoeff().transpose();
  s.range = X.colwise().maxCoeff().transpose() - s.lower;
  return s;
}

VectorXd InputScaling::apply(const VectorXd& x) const {
  if (x.size() != lower.size()) throw Error("kriging", "input dimension mismatch");
  VectorXd z(x.size());
  for (Eigen::Index d = 0; d < x.size(); ++d)
    z[d] = range[d] > 0.0 ? (x[d] - lower[d]) / range[d] : 0.0;
  return z;
}

MatrixXd InputScaling::apply(const MatrixXd& X) const {
  if (X.cols() != lower.size()) throw Error("kriging", "input dimension mismatch");
  MatrixXd Z(X.rows(), X.cols());
  for (Eigen::Index d = 0; d < X.cols(); ++d) {
    if (range[d] > 0.0)
      Z.col(d) = (X.col(d).array() - lower[d]) / range[d];
    else
      Z.col(d).setZero();
  }
  return Z;
}

double kernel_eval(double sigma_z2, const VectorXd& theta, const VectorXd& x, const VectorXd& x2) {
  const VectorXd d = x - x2;
  return sigma_z2 * std::exp(-(d.array().square() * theta.array()).sum());
}

double log_marginal_likelihood(const MatrixXd& X_norm, const VectorXd& y, double mu,
                               const KrigingHyper& hyper) {
  const MatrixXd A = PairwiseSquares(X_norm).kernel(hyper);
  Eigen::LLT<MatrixXd> llt(A);
  if (llt.info() != Eigen::Success) return kNegInf;
  const VectorXd r = y - VectorXd::Constant(y.size(), mu);
  const double logdet = 2.0 * MatrixXd(llt.matrixL()).diagonal().array().log().sum();
  return -0.5 * r.dot(llt.solve(r)) - 0.5 * logdet -
         0.5 * static_cast<double>(y.size()) * std::log(2.0 * std::numbers::pi);
}

double profiled_mean(const MatrixXd& X_norm, const VectorXd& y, const KrigingHyper& hyper) {
  const Likelihood l = profiled_likelihood(PairwiseSquares(X_norm).kernel(hyper), y);
  return std::isfinite(l.value) ? l.mu : std::numeric_limits<double>::quiet_NaN();
}

KrigingModel KrigingModel::fit(const MatrixXd& X, const VectorXd& y, const InputScaling& scaling,
                               const KrigingOptions& options, RandomSource& rng, Exec exec) {
  if (X.rows() < 2) throw Error("kriging", "Kriging needs at least 2 training points");
  if (X.rows() != y.size()) throw Error("kriging", "inputs and targets differ in length");
  if (options.n_starts < 1 || options.budget < 1) throw Error("kriging", "invalid search settings");
  if (options.fix_nugget && !(*options.fix_nugget >= 0.0))
    throw Error("kriging", "pinned nugget must be non-negative");

  State st;
  st.scaling = scaling;
  st.X_norm = scaling.apply(X);
  st.y_offset = y.mean();
  const double sd = std::sqrt((y.array() - st.y_offset).square().mean());
  st.y_scale = sd > 0.0 ? sd : 1.0;
  st.y_std = (y.array() - st.y_offset) / st.y_scale;

  const int p = static_cast<int>(X.cols());
  SearchSpace space;
  space.p = p;
  space.fit_nugget = !options.fix_nugget.has_value();
  space.fixed_nugget = options.fix_nugget.value_or(0.0);
  const int dim = p + 1 + (space.fit_nugget ? 1 : 0);
  space.lo.resize(dim);
  space.hi.resize(dim);
  space.lo.head(p).setConstant(options.log_theta_lo);
  space.hi.head(p).setConstant(options.log_theta_hi);
  space.lo[p] = options.log_sz_lo;
  space.hi[p] = options.log_sz_hi;
  if (space.fit_nugget) {
    space.lo[p + 1] = options.log_sn_lo;
    space.hi[p + 1] = options.log_sn_hi;
  }

  std::vector<std::pair<double, double>> box(static_cast<std::size_t>(dim));
  for (int i = 0; i < dim; ++i) box[static_cast<std::size_t>(i)] = {space.lo[i], space.hi[i]};
  const MatrixXd starts = latin_hypercube(options.n_starts, box, rng);
  const VectorXd steps = 0.15 * (space.hi - space.lo);

  const PairwiseSquares pairs(st.X_norm);
  std::vector<StartResult> results(static_cast<std::size_t>(options.n_starts));
  for_each_index(exec, results.size(), [&](std::size_t s) {
    Objective obj{&pairs, &st.y_std, &space};
    results[s] = nelder_mead(obj, starts.row(static_cast<Eigen::Index>(s)).transpose(), steps,
                             options.budget);
  });

  std::size_t best = 0;
  for (std::size_t s = 1; s < results.size(); ++s)
    if (results[s].value < results[best].value) best = s;
  if (!(results[best].value < 1e300))
    throw Error("kriging", "no start produced a positive definite covariance");

  st.hyper = space.decode(results[best].z);
  return restore(st);
}

KrigingModel KrigingModel::restore(const State& state) {
  KrigingModel m;
  m.state_ = state;
  m.factorize();
  return m;
}

void KrigingModel::factorize() {
  const MatrixXd A = PairwiseSquares(state_.X_norm).kernel(state_.hyper);
  const Likelihood l = profiled_likelihood(A, state_.y_std);
  if (!std::isfinite(l.value)) throw Error("kriging", "covariance matrix is not positive definite");
  llt_.compute(A);
  mu_ = l.mu;
  log_likelihood_ = l.value;
  alpha_ = llt_.solve(state_.y_std - VectorXd::Constant(state_.y_std.size(), mu_));
}

VectorXd KrigingModel::cross_kernel(const VectorXd& z) const {
  const Eigen::Index n = state_.X_norm.rows();
  VectorXd k(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double s = 0.0;
    for (Eigen::Index d = 0; d < z.size(); ++d) {
      const double diff = state_.X_norm(i, d) - z[d];
      s += state_.hyper.theta[d] * diff * diff;
    }
    k[i] = state_.hyper.sigma_z2 * std::exp(-s);
  }
  return k;
}

double KrigingModel::predict_mean(const VectorXd& x_raw) const {
  const VectorXd k = cross_kernel(state_.scaling.apply(x_raw));
  return state_.y_offset + state_.y_scale * (mu_ + k.dot(alpha_));
}

KrigingModel::Prediction KrigingModel::predict(const VectorXd& x_raw) const {
  const VectorXd k = cross_kernel(state_.scaling.apply(x_raw));
  const VectorXd v = llt_.matrixL().solve(k);
  const double var = std::max(0.0, state_.hyper.sigma_z2 - v.squaredNorm());
  return {state_.y_offset + state_.y_scale * (mu_ + k.dot(alpha_)),
          state_.y_scale * state_.y_scale * var};
}

}  // namespace kfdr
