#include "kfdr/uq.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "kfdr/error.hpp"

namespace kfdr {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr std::size_t kChunk = 512;

struct LognormalParams {
  double mu, s;
};

LognormalParams lognormal_params(double mean, double std) {
  const double s2 = std::log1p((std * std) / (mean * mean));
  return {std::log(mean) - 0.5 * s2, std::sqrt(s2)};
}

}  // namespace

std::string to_string(MarginalKind kind) {
  switch (kind) {
    case MarginalKind::Normal: return "normal";
    case MarginalKind::Lognormal: return "lognormal";
    case MarginalKind::Uniform: return "uniform";
  }
  return "?";
}

MarginalKind parse_marginal_kind(const std::string& s) {
  if (s == "normal") return MarginalKind::Normal;
  if (s == "lognormal") return MarginalKind::Lognormal;
  if (s == "uniform") return MarginalKind::Uniform;
  throw Error("uq", "unknown distribution '" + s + "' (expected normal, lognormal or uniform)");
}

void Marginal::validate() const {
  if (!std::isfinite(a) || !std::isfinite(b)) throw Error("uq", "distribution parameters must be finite");
  switch (kind) {
    case MarginalKind::Normal:
      if (!(b > 0.0)) throw Error("uq", "normal std must be positive");
      break;
    case MarginalKind::Lognormal:
      if (!(b > 0.0)) throw Error("uq", "lognormal std must be positive");
      if (!(a > 0.0)) throw Error("uq", "lognormal mean must be positive");
      break;
    case MarginalKind::Uniform:
      if (!(a < b)) throw Error("uq", "uniform bounds need lower < upper");
      break;
  }
}

double Marginal::sample(RandomSource& rng) const {
  switch (kind) {
    case MarginalKind::Normal: return a + b * rng.normal();
    case MarginalKind::Lognormal: {
      const auto p = lognormal_params(a, b);
      return std::exp(p.mu + p.s * rng.normal());
    }
    case MarginalKind::Uniform: return rng.uniform(a, b);
  }
  return 0.0;
}

double Marginal::log_pdf(double x) const {
  constexpr double half_log_2pi = 0.91893853320467274178;
  switch (kind) {
    case MarginalKind::Normal: {
      const double z = (x - a) / b;
      return -0.5 * z * z - std::log(b) - half_log_2pi;
    }
    case MarginalKind::Lognormal: {
      if (!(x > 0.0)) return kNegInf;
      const auto p = lognormal_params(a, b);
      const double z = (std::log(x) - p.mu) / p.s;
      return -0.5 * z * z - std::log(p.s * x) - half_log_2pi;
    }
    case MarginalKind::Uniform:
      return (x >= a && x <= b) ? -std::log(b - a) : kNegInf;
  }
  return kNegInf;
}

double Marginal::mean() const { return kind == MarginalKind::Uniform ? 0.5 * (a + b) : a; }

double Marginal::stddev() const {
  return kind == MarginalKind::Uniform ? (b - a) / std::sqrt(12.0) : b;
}

void InputDistribution::validate() const {
  if (marginals.empty()) throw Error("uq", "input distribution has no dimensions");
  if (!names.empty() && names.size() != marginals.size())
    throw Error("uq", "distribution names do not match its dimension");
  for (const auto& m : marginals) m.validate();
}

VectorXd InputDistribution::sample_one(RandomSource& rng) const {
  VectorXd x(dims());
  for (int d = 0; d < dims(); ++d) x[d] = marginals[static_cast<std::size_t>(d)].sample(rng);
  return x;
}

MatrixXd InputDistribution::sample(int n, RandomSource& rng) const {
  MatrixXd X(n, dims());
  for (int i = 0; i < n; ++i) X.row(i) = sample_one(rng).transpose();
  return X;
}

double InputDistribution::log_pdf(const VectorXd& x) const {
  if (x.size() != dims()) throw Error("uq", "log_pdf: dimension mismatch");
  double lp = 0.0;
  for (int d = 0; d < dims(); ++d) {
    lp += marginals[static_cast<std::size_t>(d)].log_pdf(x[d]);
    if (lp == kNegInf) return lp;
  }
  return lp;
}

// ------------------------------------------------------------- KDE ----

double quantile(std::vector<double> values, double p) {
  if (values.empty()) throw Error("uq", "quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

double silverman_bandwidth(const VectorXd& samples) {
  const auto n = samples.size();
  if (n < 2) throw Error("uq", "KDE needs at least 2 samples");
  const double mean = samples.mean();
  const double sd = std::sqrt((samples.array() - mean).square().sum() / static_cast<double>(n - 1));
  if (!(sd > 0.0)) throw Error("uq", "KDE samples are all identical (zero bandwidth)");
  std::vector<double> v(samples.data(), samples.data() + n);
  const double iqr = quantile(v, 0.75) - quantile(v, 0.25);
  const double spread = iqr > 0.0 ? std::min(sd, iqr / 1.34) : sd;
  return 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
}

namespace {

VectorXd kde_with_bandwidth(const VectorXd& samples, const VectorXd& eval_points, double h,
                            Exec exec) {
  VectorXd out(eval_points.size());
  const double norm = 1.0 / (static_cast<double>(samples.size()) * h * std::sqrt(2.0 * std::numbers::pi));
  for_each_index(exec, static_cast<std::size_t>(eval_points.size()), [&](std::size_t i) {
    const double x = eval_points[static_cast<Eigen::Index>(i)];
    double acc = 0.0;
    for (Eigen::Index k = 0; k < samples.size(); ++k) {
      const double z = (x - samples[k]) / h;
      acc += std::exp(-0.5 * z * z);
    }
    out[static_cast<Eigen::Index>(i)] = norm * acc;
  });
  return out;
}

}  // namespace

VectorXd kde_pdf(const VectorXd& samples, const VectorXd& eval_points) {
  return kde_with_bandwidth(samples, eval_points, silverman_bandwidth(samples), kDefaultExec);
}

// ------------------------------------------------------ forward UQ ----

namespace {

bool has_spread(const VectorXd& v) { return v.size() >= 2 && v.maxCoeff() > v.minCoeff(); }

void attach_kde(ForwardUqResult& r, int points, Exec exec) {
  if (!has_spread(r.maxima) || !has_spread(r.minima) || points < 2) return;
  const double h_max = silverman_bandwidth(r.maxima);
  const double h_min = silverman_bandwidth(r.minima);
  const double lo = std::min(r.maxima.minCoeff() - 6 * h_max, r.minima.minCoeff() - 6 * h_min);
  const double hi = std::max(r.maxima.maxCoeff() + 6 * h_max, r.minima.maxCoeff() + 6 * h_min);
  r.kde_values = VectorXd::LinSpaced(points, lo, hi);
  r.pdf_max = kde_with_bandwidth(r.maxima, r.kde_values, h_max, exec);
  r.pdf_min = kde_with_bandwidth(r.minima, r.kde_values, h_min, exec);
}

void check_forward_args(const InputDistribution& dist, const ForwardUqOptions& options) {
  dist.validate();
  if (options.n_mcs < 2) throw Error("uq", "n_mcs must be at least 2");
}

}  // namespace

ForwardUqResult forward_uq(const LatentSurrogate& s, const InputDistribution& dist,
                           const ForwardUqOptions& options, RandomSource& rng, Exec exec) {
  check_forward_args(dist, options);
  if (dist.dims() != s.input_dims())
    throw Error("uq", "distribution dimension " + std::to_string(dist.dims()) +
                          " does not match surrogate input dimension " + std::to_string(s.input_dims()));
  const int n = options.n_mcs;
  RandomSource draw = rng.derive("inputs");
  const MatrixXd X = dist.sample(n, draw);
  const MatrixXd xi = s.latent_means(X, exec);
  const MatrixXd& phi = s.modes();

  ForwardUqResult r;
  r.n_mcs = n;
  r.t = s.grid().nodes();
  const VectorXd xi_bar = xi.colwise().mean().transpose();
  r.mean = s.mean_curve() + phi * xi_bar;
  const MatrixXd dev = xi.rowwise() - xi_bar.transpose();
  const MatrixXd cov = (dev.transpose() * dev) / static_cast<double>(n);
  const MatrixXd phicov = phi * cov;
  r.std = (phicov.cwiseProduct(phi)).rowwise().sum().cwiseMax(0.0).cwiseSqrt();

  r.maxima.resize(n);
  r.minima.resize(n);
  const std::size_t chunks = (static_cast<std::size_t>(n) + kChunk - 1) / kChunk;
  for_each_index(exec, chunks, [&](std::size_t c) {
    const auto lo = static_cast<Eigen::Index>(c * kChunk);
    const auto len = std::min<Eigen::Index>(static_cast<Eigen::Index>(kChunk), n - lo);
    const MatrixXd curves =
        (xi.middleRows(lo, len) * phi.transpose()).rowwise() + s.mean_curve().transpose();
    r.maxima.segment(lo, len) = curves.rowwise().maxCoeff();
    r.minima.segment(lo, len) = curves.rowwise().minCoeff();
  });
  attach_kde(r, options.kde_points, exec);
  return r;
}

ForwardUqResult forward_uq(const CurveModel& model, const TimeGrid& grid,
                           const InputDistribution& dist, const ForwardUqOptions& options,
                           RandomSource& rng, Exec exec) {
  check_forward_args(dist, options);
  const int n = options.n_mcs;
  const int nt = grid.size();
  RandomSource draw = rng.derive("inputs");
  const MatrixXd X = dist.sample(n, draw);

  struct Moments {
    double count = 0.0;
    VectorXd mean, m2;
  };
  const std::size_t chunks = (static_cast<std::size_t>(n) + kChunk - 1) / kChunk;
  std::vector<Moments> parts(chunks);
  ForwardUqResult r;
  r.n_mcs = n;
  r.t = grid.nodes();
  r.maxima.resize(n);
  r.minima.resize(n);
  for_each_index(exec, chunks, [&](std::size_t c) {
    const auto lo = static_cast<Eigen::Index>(c * kChunk);
    const auto hi = std::min<Eigen::Index>(lo + static_cast<Eigen::Index>(kChunk), n);
    Moments m{0.0, VectorXd::Zero(nt), VectorXd::Zero(nt)};
    for (Eigen::Index i = lo; i < hi; ++i) {
      const VectorXd y = model(X.row(i).transpose());
      if (y.size() != nt) throw Error("uq", "model curve length does not match the grid");
      m.count += 1.0;
      const VectorXd delta = y - m.mean;
      m.mean += delta / m.count;
      m.m2 += delta.cwiseProduct(y - m.mean);
      r.maxima[i] = y.maxCoeff();
      r.minima[i] = y.minCoeff();
    }
    parts[c] = std::move(m);
  });
  Moments total{0.0, VectorXd::Zero(nt), VectorXd::Zero(nt)};
  for (const auto& p : parts) {
    const double nab = total.count + p.count;
    const VectorXd delta = p.mean - total.mean;
    total.mean += delta * (p.count / nab);
    total.m2 += p.m2 + delta.cwiseProduct(delta) * (total.count * p.count / nab);
    total.count = nab;
  }
  r.mean = total.mean;
  r.std = (total.m2 / total.count).cwiseMax(0.0).cwiseSqrt();
  attach_kde(r, options.kde_points, exec);
  return r;
}

// ------------------------------------------------------ inverse UQ ----

double log_likelihood(const MatrixXd& observations, const VectorXd& prediction, double sigma) {
  if (observations.cols() != prediction.size())
    throw Error("uq", "observation length does not match the model curve");
  if (!(sigma > 0.0)) return kNegInf;
  const double nt = static_cast<double>(prediction.size());
  const double var = sigma * sigma;
  double ll = 0.0;
  for (Eigen::Index i = 0; i < observations.rows(); ++i) {
    const double sse = (observations.row(i).transpose() - prediction).squaredNorm();
    ll += -0.5 * nt * std::log(2.0 * std::numbers::pi * var) - sse / (2.0 * var);
  }
  return ll;
}

double log_posterior(const CurveModel& model, const InputDistribution& prior,
                     const MatrixXd& observations, const VectorXd& x, double sigma) {
  if (!(sigma > 0.0)) return kNegInf;
  const double lp = prior.log_pdf(x);
  if (lp == kNegInf || std::isnan(lp)) return kNegInf;
  const VectorXd pred = model(x);
  if (!pred.allFinite()) return kNegInf;
  const double ll = log_likelihood(observations, pred, sigma);
  return std::isnan(ll) ? kNegInf : lp + ll;
}

void CalibrationProblem::validate() const {
  prior.validate();
  if (!model) throw Error("uq", "calibration problem has no model");
  if (observations.rows() == 0) throw Error("uq", "inverse UQ needs at least one observation");
  if (known_sigma) {
    if (!(*known_sigma > 0.0)) throw Error("uq", "known noise std must be positive");
  } else if (!(sigma_lo > 0.0 && sigma_lo < sigma_hi)) {
    throw Error("uq", "noise prior needs 0 < sigma_lo < sigma_hi");
  }
}

double CalibrationProblem::operator()(const VectorXd& theta) const {
  const int p = prior.dims();
  double sigma = 0.0;
  double lp_sigma = 0.0;
  if (known_sigma) {
    sigma = *known_sigma;
  } else {
    sigma = theta[p];
    if (!(sigma >= sigma_lo && sigma <= sigma_hi)) return kNegInf;
    lp_sigma = -std::log(sigma_hi - sigma_lo);
  }
  const double lp = log_posterior(model, prior, observations, theta.head(p), sigma);
  return lp == kNegInf ? lp : lp + lp_sigma;
}

VectorXd CalibrationProblem::sample_prior(RandomSource& rng) const {
  VectorXd theta(dims());
  theta.head(prior.dims()) = prior.sample_one(rng);
  if (!known_sigma) theta[prior.dims()] = rng.uniform(sigma_lo, sigma_hi);
  return theta;
}

std::vector<std::string> CalibrationProblem::parameter_names() const {
  std::vector<std::string> names = prior.names;
  if (names.empty())
    for (int d = 0; d < prior.dims(); ++d) names.push_back("x" + std::to_string(d + 1));
  if (!known_sigma) names.emplace_back("sigma");
  return names;
}

double stretch_z(double a, RandomSource& rng) {
  const double u = rng.uniform();
  const double w = (a - 1.0) * u + 1.0;
  return w * w / a;
}

PosteriorSamples ensemble_mcmc(const LogDensity& logpost, const InitialDraw& init, int dims,
                               const McmcOptions& options, RandomSource& rng, Exec exec) {
  const int K = options.walkers;
  if (dims < 1) throw Error("uq", "sampler dimension must be positive");
  if (K < 2 * (dims + 1))
    throw Error("uq", "need at least 2 (dim + 1) = " + std::to_string(2 * (dims + 1)) + " walkers");
  if (options.iterations < 2) throw Error("uq", "need at least 2 iterations");
  if (!(options.burn_in >= 0.0 && options.burn_in < 1.0))
    throw Error("uq", "burn-in fraction must lie in [0, 1)");
  if (!(options.a > 1.0)) throw Error("uq", "stretch scale a must exceed 1");

  RandomSource init_rng = rng.derive("init");
  RandomSource step_rng = rng.derive("steps");
  MatrixXd X(K, dims);
  VectorXd lp(K);
  for (int k = 0; k < K; ++k) X.row(k) = init(init_rng).transpose();
  for_each_index(exec, static_cast<std::size_t>(K),
                 [&](std::size_t k) { lp[static_cast<Eigen::Index>(k)] = logpost(X.row(static_cast<Eigen::Index>(k)).transpose()); });
  // Redraw walkers that start outside the support.
  constexpr int kInitRounds = 100;
  for (int round = 0; round < kInitRounds; ++round) {
    std::vector<int> bad;
    for (int k = 0; k < K; ++k)
      if (!std::isfinite(lp[k])) bad.push_back(k);
    if (bad.empty()) break;
    for (int k : bad) X.row(k) = init(init_rng).transpose();
    for_each_index(exec, bad.size(), [&](std::size_t i) {
      const int k = bad[i];
      lp[k] = logpost(X.row(k).transpose());
    });
  }
  for (int k = 0; k < K; ++k)
    if (!std::isfinite(lp[k]))
      throw Error("uq", "log posterior is not finite at initial walker " + std::to_string(k) +
                            " after " + std::to_string(kInitRounds) + " prior redraws");

  const int n_burn = static_cast<int>(std::floor(options.burn_in * options.iterations));
  const int kept = options.iterations - n_burn;
  PosteriorSamples out;
  out.walkers = K;
  out.iterations = options.iterations;
  out.burn_in = options.burn_in;
  out.draws.resize(static_cast<Eigen::Index>(kept) * K, dims);

  const int half = K / 2;
  const int lo_of[2] = {0, half};
  const int hi_of[2] = {half, K};
  long long accepted = 0;
  long long proposed = 0;
  MatrixXd Y(K, dims);
  VectorXd lp_y(K), z(K), log_u(K);
  for (int it = 0; it < options.iterations; ++it) {
    for (int s = 0; s < 2; ++s) {
      const int lo = lo_of[s], hi = hi_of[s];
      const int olo = lo_of[1 - s], on = hi_of[1 - s] - lo_of[1 - s];
      for (int k = lo; k < hi; ++k) {
        const int j = olo + static_cast<int>(step_rng.index(static_cast<std::size_t>(on)));
        z[k] = stretch_z(options.a, step_rng);
        log_u[k] = std::log(step_rng.uniform());
        Y.row(k) = X.row(j) + z[k] * (X.row(k) - X.row(j));
      }
      for_each_index(exec, static_cast<std::size_t>(hi - lo), [&](std::size_t i) {
        const auto k = static_cast<Eigen::Index>(lo + static_cast<int>(i));
        lp_y[k] = logpost(Y.row(k).transpose());
      });
      for (int k = lo; k < hi; ++k) {
        ++proposed;
        if (!std::isfinite(lp_y[k])) continue;
        const double log_ratio = (dims - 1) * std::log(z[k]) + lp_y[k] - lp[k];
        if (log_u[k] < log_ratio) {
          X.row(k) = Y.row(k);
          lp[k] = lp_y[k];
          ++accepted;
        }
      }
    }
    if (it >= n_burn) out.draws.middleRows(static_cast<Eigen::Index>(it - n_burn) * K, K) = X;
  }
  out.acceptance_rate = static_cast<double>(accepted) / static_cast<double>(proposed);
  return out;
}

std::vector<ParameterSummary> posterior_summary(const MatrixXd& draws,
                                                const std::vector<std::string>& names) {
  if (draws.rows() == 0) throw Error("uq", "posterior summary of an empty sample");
  if (!names.empty() && names.size() != static_cast<std::size_t>(draws.cols()))
    throw Error("uq", "parameter names do not match draw columns");
  std::vector<ParameterSummary> out;
  for (Eigen::Index d = 0; d < draws.cols(); ++d) {
    std::vector<double> v(static_cast<std::size_t>(draws.rows()));
    double sum = 0.0;
    for (Eigen::Index i = 0; i < draws.rows(); ++i) {
      v[static_cast<std::size_t>(i)] = draws(i, d);
      sum += draws(i, d);
    }
    ParameterSummary p;
    p.name = names.empty() ? "x" + std::to_string(d + 1) : names[static_cast<std::size_t>(d)];
    p.mean = sum / static_cast<double>(draws.rows());
    p.lower = quantile(v, 0.025);
    p.upper = quantile(v, 0.975);
    if (draws.col(d).maxCoeff() == draws.col(d).minCoeff()) p.mean = p.lower = p.upper = draws(0, d);
    out.push_back(p);
  }
  return out;
}

}  // namespace kfdr
