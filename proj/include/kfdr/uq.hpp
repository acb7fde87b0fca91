#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "kfdr/surrogate.hpp"

namespace kfdr {

enum class MarginalKind { Normal, Lognormal, Uniform };

std::string to_string(MarginalKind kind);
MarginalKind parse_marginal_kind(const std::string& s);

/// One independent input marginal. Normal(a = mean, b = std),
/// Lognormal(a = mean, b = std, both of the variable itself),
/// Uniform(a = lower, b = upper).
struct Marginal {
  MarginalKind kind = MarginalKind::Normal;
  double a = 0.0;
  double b = 1.0;

  static Marginal normal(double mean, double std) { return {MarginalKind::Normal, mean, std}; }
  static Marginal lognormal(double mean, double std) { return {MarginalKind::Lognormal, mean, std}; }
  static Marginal uniform(double lo, double hi) { return {MarginalKind::Uniform, lo, hi}; }

  void validate() const;
  double sample(RandomSource& rng) const;
  /// -infinity outside the support.
  double log_pdf(double x) const;
  double mean() const;
  double stddev() const;
};

struct InputDistribution {
  std::vector<Marginal> marginals;
  std::vector<std::string> names;

  int dims() const noexcept { return static_cast<int>(marginals.size()); }
  void validate() const;
  /// n x p, drawn row by row.
  MatrixXd sample(int n, RandomSource& rng) const;
  VectorXd sample_one(RandomSource& rng) const;
  double log_pdf(const VectorXd& x) const;
};

/// Maps an input vector to a curve on a fixed grid.
using CurveModel = std::function<VectorXd(const VectorXd&)>;

struct ForwardUqOptions {
  int n_mcs = 100000;
  int kde_points = 1024;
};

struct ForwardUqResult {
  VectorXd t;
  VectorXd mean;
  VectorXd std;
  VectorXd maxima;  // per-sample max over the grid
  VectorXd minima;
  /// Shared evaluation window covering both populations padded by 6h; empty
  /// when a population has no spread.
  VectorXd kde_values;
  VectorXd pdf_max;
  VectorXd pdf_min;
  int n_mcs = 0;
};

/// Monte Carlo through the surrogate's mean prediction. The mean curve is
/// mean_curve + modes * avg(xi); the variance is the quadratic form of modes
/// with the population covariance of the latent means, which equals the
/// pointwise 1/N variance of the predicted curves.
ForwardUqResult forward_uq(const LatentSurrogate& s, const InputDistribution& dist,
                           const ForwardUqOptions& options, RandomSource& rng,
                           Exec exec = kDefaultExec);

/// Same statistics with an exact model in place of the surrogate.
ForwardUqResult forward_uq(const CurveModel& model, const TimeGrid& grid,
                           const InputDistribution& dist, const ForwardUqOptions& options,
                           RandomSource& rng, Exec exec = kDefaultExec);

/// Type-7 quantile (linear interpolation between order statistics).
double quantile(std::vector<double> values, double p);

/// 0.9 min(std, IQR / 1.34) n^{-1/5}; falls back to the std when the IQR is
/// zero. Throws when all samples are identical.
double silverman_bandwidth(const VectorXd& samples);

/// Gaussian-kernel density estimate with Silverman bandwidth.
VectorXd kde_pdf(const VectorXd& samples, const VectorXd& eval_points);

/// sum_i -(n_t/2) ln(2 pi sigma^2) - ||y_i - prediction||^2 / (2 sigma^2),
/// observations one per row.
double log_likelihood(const MatrixXd& observations, const VectorXd& prediction, double sigma);

/// Log prior + log likelihood of (x, sigma); -infinity outside the prior
/// support or for sigma <= 0.
double log_posterior(const CurveModel& model, const InputDistribution& prior,
                     const MatrixXd& observations, const VectorXd& x, double sigma);

/// Calibration target over theta = [x, sigma] (or theta = x when sigma is
/// known). The noise std gets a uniform prior on [sigma_lo, sigma_hi].
struct CalibrationProblem {
  CurveModel model;
  InputDistribution prior;
  MatrixXd observations;  // N_obs x n_t
  double sigma_lo = 1e-8;
  double sigma_hi = 1.0;
  std::optional<double> known_sigma;

  void validate() const;
  int dims() const noexcept { return prior.dims() + (known_sigma ? 0 : 1); }
  double operator()(const VectorXd& theta) const;
  VectorXd sample_prior(RandomSource& rng) const;
  std::vector<std::string> parameter_names() const;
};

struct McmcOptions {
  int walkers = 100;
  int iterations = 300;
  double burn_in = 0.5;
  double a = 2.0;
};

struct PosteriorSamples {
  MatrixXd draws;  // post burn-in, iteration-major then walker
  int walkers = 0;
  int iterations = 0;
  double burn_in = 0.0;
  double acceptance_rate = 0.0;
};

/// z = ((a - 1) u + 1)^2 / a, density proportional to 1/sqrt(z) on [1/a, a].
double stretch_z(double a, RandomSource& rng);

using LogDensity = std::function<double(const VectorXd&)>;
using InitialDraw = std::function<VectorXd(RandomSource&)>;

/// Affine-invariant ensemble sampler with stretch moves. The ensemble is
/// split into two halves updated in turn, each walker against a partner from
/// the complementary half; all random numbers are drawn serially before the
/// density evaluations, so the chain does not depend on `exec`.
PosteriorSamples ensemble_mcmc(const LogDensity& logpost, const InitialDraw& init, int dims,
                               const McmcOptions& options, RandomSource& rng,
                               Exec exec = kDefaultExec);

struct ParameterSummary {
  std::string name;
  double mean = 0.0;
  double lower = 0.0;  // 2.5%
  double upper = 0.0;  // 97.5%
};

std::vector<ParameterSummary> posterior_summary(const MatrixXd& draws,
                                                const std::vector<std::string>& names);

}  // namespace kfdr
