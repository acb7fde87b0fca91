#pragma once

#include <optional>

#include "kfdr/core.hpp"
#include "kfdr/parallel.hpp"

namespace kfdr {

/// Affine map of raw inputs onto the unit hypercube by training bounds.
/// Dimensions with zero range map to 0.
struct InputScaling {
  VectorXd lower;
  VectorXd range;

  static InputScaling from_data(const MatrixXd& X);
  int dims() const noexcept { return static_cast<int>(lower.size()); }
  VectorXd apply(const VectorXd& x) const;
  MatrixXd apply(const MatrixXd& X) const;
  bool operator==(const InputScaling&) const = default;
};

struct KrigingHyper {
  VectorXd theta;          // per-dimension scaling weights, > 0
  double sigma_z2 = 1.0;   // process variance
  double sigma_n2 = 0.0;   // nugget (noise) variance
};

struct KrigingOptions {
  int n_starts = 10;
  int budget = 400;  // objective evaluations per start
  /// Pin the nugget (in standardized-score units) instead of estimating it.
  std::optional<double> fix_nugget;
  // log10 search boxes
  double log_theta_lo = -4.0, log_theta_hi = 4.0;
  double log_sz_lo = -4.0, log_sz_hi = 2.0;
  double log_sn_lo = -8.0, log_sn_hi = 1.0;
};

/// sigma_z2 * exp(-(x - x2)^T diag(theta) (x - x2)).
double kernel_eval(double sigma_z2, const VectorXd& theta, const VectorXd& x, const VectorXd& x2);

/// Log marginal likelihood of y under the ordinary Kriging model with
/// constant mean mu and covariance K + sigma_n2 I, via Cholesky. Returns
/// -infinity when the covariance does not factor.
double log_marginal_likelihood(const MatrixXd& X_norm, const VectorXd& y, double mu,
                               const KrigingHyper& hyper);

/// Generalized least-squares mean (1^T A^{-1} y) / (1^T A^{-1} 1), the exact
/// maximizer of the likelihood in mu. NaN when A does not factor.
double profiled_mean(const MatrixXd& X_norm, const VectorXd& y, const KrigingHyper& hyper);

/// Ordinary Kriging with a homoscedastic nugget on one scalar target.
class KrigingModel {
 public:
  struct State {
    InputScaling scaling;
    MatrixXd X_norm;  // N x p
    VectorXd y_std;   // standardized targets
    double y_offset = 0.0;
    double y_scale = 1.0;
    KrigingHyper hyper;
  };

  struct Prediction {
    double mean = 0.0;
    double variance = 0.0;
  };

  /// Maximum-likelihood fit: inputs scaled by `scaling`, targets standardized,
  /// mu profiled, remaining hyperparameters searched in log10 space by
  /// Nelder-Mead from Latin-hypercube starts. Throws if no start yields a
  /// positive definite covariance.
  static KrigingModel fit(const MatrixXd& X, const VectorXd& y, const InputScaling& scaling,
                          const KrigingOptions& options, RandomSource& rng,
                          Exec exec = kDefaultExec);
  static KrigingModel restore(const State& state);

  const State& state() const noexcept { return state_; }
  const KrigingHyper& hyper() const noexcept { return state_.hyper; }
  /// Estimated constant mean, in standardized units.
  double mu() const noexcept { return mu_; }
  /// Log marginal likelihood at the fitted hyperparameters (standardized units).
  double log_likelihood() const noexcept { return log_likelihood_; }
  /// Nugget in the units of the raw target.
  double nugget_raw() const noexcept { return state_.hyper.sigma_n2 * state_.y_scale * state_.y_scale; }

  /// Predictive mean and latent-function variance k(x,x) - k^T A^{-1} k
  /// (clamped at 0), de-standardized.
  Prediction predict(const VectorXd& x_raw) const;
  double predict_mean(const VectorXd& x_raw) const;

 private:
  KrigingModel() = default;
  void factorize();
  VectorXd cross_kernel(const VectorXd& x_norm) const;

  State state_;
  Eigen::LLT<MatrixXd> llt_;
  VectorXd alpha_;
  double mu_ = 0.0;
  double log_likelihood_ = 0.0;
};

}  // namespace kfdr
