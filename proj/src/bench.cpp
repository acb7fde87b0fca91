#include "kfdr/bench.hpp"

#include <cmath>
#include <numbers>

#include "kfdr/error.hpp"

namespace kfdr {

VectorXd rk4_step(const OdeRhs& f, double t, const VectorXd& y, double h) {
  const auto n = y.size();
  VectorXd k1(n), k2(n), k3(n), k4(n);
  f(t, y, k1);
  f(t + 0.5 * h, y + 0.5 * h * k1, k2);
  f(t + 0.5 * h, y + 0.5 * h * k2, k3);
  f(t + h, y + h * k3, k4);
  return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

MatrixXd rk4_integrate(const OdeRhs& f, const VectorXd& y0, const TimeGrid& grid, int substeps) {
  if (substeps < 1) throw Error("bench", "substep factor must be at least 1");
  if (!y0.allFinite()) throw Error("bench", "initial state is not finite");
  const int nt = grid.size();
  const double h = grid.step() / substeps;
  MatrixXd out(nt, y0.size());
  out.row(0) = y0.transpose();
  VectorXd y = y0;
  for (int j = 1; j < nt; ++j) {
    const double tj = grid.node(j - 1);
    for (int s = 0; s < substeps; ++s) {
      y = rk4_step(f, tj + s * h, y, h);
      if (!y.allFinite())
        throw Error("bench", "non-finite state at step " + std::to_string((j - 1) * substeps + s + 1) +
                                 " (t = " + std::to_string(tj + (s + 1) * h) + ")");
    }
    out.row(j) = y.transpose();
  }
  return out;
}

// ----------------------------------------------------------- Duffing ----

TimeGrid duffing_grid() { return {0.0, 2.0, 401}; }

double duffing_excitation(const DuffingParams& p, double t) {
  return p.alpha * std::cos(p.beta * t) + std::sin((p.beta + 3.0) * t) + std::sin(2.0 * p.beta * t);
}

VectorXd duffing_response(const DuffingParams& p, int substeps) {
  const OdeRhs f = [&p](double t, const VectorXd& s, VectorXd& ds) {
    const double y = s[0], v = s[1];
    const double restoring = DuffingParams::k * y + DuffingParams::k2 * y * y + DuffingParams::k3 * y * y * y;
    ds[0] = v;
    ds[1] = (duffing_excitation(p, t) - p.c * v - restoring) / DuffingParams::mass;
  };
  VectorXd s0(2);
  s0 << p.y0, 0.0;
  return rk4_integrate(f, s0, duffing_grid(), substeps).col(0);
}

// ---------------------------------------------------------- Bouc-Wen ----

TimeGrid boucwen_grid() { return {0.0, 16.0, 401}; }

BoucWenExcitation BoucWenExcitation::from_seed(std::uint64_t seed, int substeps) {
  RandomSource rng(seed);
  VectorXd v(2 * kTerms);
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = rng.normal();
  return from_coefficients(std::move(v), substeps);
}

BoucWenExcitation BoucWenExcitation::from_coefficients(VectorXd coefficients, int substeps) {
  if (coefficients.size() != 2 * kTerms)
    throw Error("bench", "Bouc-Wen excitation needs " + std::to_string(2 * kTerms) + " coefficients");
  if (substeps < 1) throw Error("bench", "substep factor must be at least 1");
  BoucWenExcitation e;
  e.coef_ = std::move(coefficients);
  e.substeps_ = substeps;
  const TimeGrid g = boucwen_grid();
  e.t0_ = g.t0();
  e.half_step_ = g.step() / (2.0 * substeps);
  const int points = (g.size() - 1) * substeps * 2 + 1;
  e.table_.resize(points);
  for (int i = 0; i < points; ++i) e.table_[i] = e.unit(e.t0_ + i * e.half_step_);
  return e;
}

double BoucWenExcitation::unit(double t) const {
  const double w = 0.1 * std::numbers::pi;
  double acc = 0.0;
  for (int k = 1; k <= kTerms; ++k)
    acc += coef_[k - 1] * std::cos(w * k * t) + coef_[kTerms + k - 1] * std::sin(w * k * t);
  return acc;
}

double BoucWenExcitation::force(double m, double t) const {
  return -std::sqrt(0.006 * std::numbers::pi * m) * unit(t);
}

double BoucWenExcitation::tabulated_unit(double t) const {
  const double pos = (t - t0_) / half_step_;
  const auto i = static_cast<Eigen::Index>(std::lround(pos));
  if (i < 0 || i >= table_.size() || std::abs(pos - static_cast<double>(i)) > 1e-6)
    throw Error("bench", "excitation requested off the tabulated half-step grid");
  return table_[i];
}

MatrixXd boucwen_states(const BoucWenParams& p, const BoucWenExcitation& excitation) {
  const double scale = -std::sqrt(0.006 * std::numbers::pi * p.m);
  const OdeRhs f = [&](double t, const VectorXd& s, VectorXd& ds) {
    const double y = s[0], v = s[1], z = s[2];
    const double az = std::abs(z);
    const double force = scale * excitation.tabulated_unit(t);
    ds[0] = v;
    ds[1] = (force - p.c * v - p.k * (p.alpha * y + (1.0 - p.alpha) * z)) / p.m;
    ds[2] = BoucWenParams::A * v - BoucWenParams::beta * std::abs(v) * std::pow(az, BoucWenParams::n - 1) * z -
            BoucWenParams::gamma * v * std::pow(az, BoucWenParams::n);
  };
  VectorXd s0(3);
  s0 << p.y0, 0.0, 0.0;
  return rk4_integrate(f, s0, boucwen_grid(), excitation.substeps());
}

VectorXd boucwen_response(const BoucWenParams& p, const BoucWenExcitation& excitation) {
  return boucwen_states(p, excitation).col(0);
}

// ---------------------------------------------------------- datasets ----

std::string to_string(BenchModel model) {
  return model == BenchModel::Duffing ? "duffing" : "boucwen";
}

BenchModel parse_bench_model(const std::string& s) {
  if (s == "duffing") return BenchModel::Duffing;
  if (s == "boucwen") return BenchModel::BoucWen;
  throw Error("bench", "unknown model '" + s + "' (expected duffing or boucwen)");
}

BenchInfo bench_info(BenchModel model) {
  if (model == BenchModel::Duffing)
    return {{"alpha", "beta", "c", "y0"}, {{0.6, 1.4}, {1.5, 2.5}, {0.6, 1.4}, {-1e-4, 0.0}}, duffing_grid()};
  return {{"m", "c", "k", "alpha", "y0"},
          {{4e4, 8e4}, {8e4, 1.2e5}, {4e6, 6e6}, {0.1, 0.3}, {-0.02, 0.02}},
          boucwen_grid()};
}

BenchSimulator::BenchSimulator(BenchModel model, std::uint64_t excitation_seed, int substeps)
    : model_(model),
      info_(bench_info(model)),
      substeps_(substeps),
      excitation_(BoucWenExcitation::from_seed(excitation_seed, substeps)) {}

VectorXd BenchSimulator::operator()(const VectorXd& x) const {
  if (x.size() != static_cast<Eigen::Index>(info_.names.size()))
    throw Error("bench", to_string(model_) + " expects " + std::to_string(info_.names.size()) + " inputs");
  if (model_ == BenchModel::Duffing) return duffing_response({x[0], x[1], x[2], x[3]}, substeps_);
  return boucwen_response({x[0], x[1], x[2], x[3], x[4]}, excitation_);
}

MatrixXd BenchSimulator::responses(const MatrixXd& X, Exec exec) const {
  MatrixXd Y(X.rows(), info_.grid.size());
  for_each_index(exec, static_cast<std::size_t>(X.rows()), [&](std::size_t i) {
    const auto r = static_cast<Eigen::Index>(i);
    Y.row(r) = (*this)(X.row(r).transpose()).transpose();
  });
  return Y;
}

void add_noise(MatrixXd& responses, double noise_std, RandomSource& rng) {
  if (!(noise_std >= 0.0)) throw Error("bench", "noise std must be non-negative");
  if (noise_std == 0.0) return;
  for (Eigen::Index i = 0; i < responses.rows(); ++i)
    for (Eigen::Index j = 0; j < responses.cols(); ++j) responses(i, j) += noise_std * rng.normal();
}

ResponseEnsemble generate_dataset(const BenchSimulator& sim, int n, RandomSource& rng,
                                  double noise_std, Exec exec) {
  if (n < 1) throw Error("bench", "dataset size must be at least 1");
  if (!(noise_std >= 0.0)) throw Error("bench", "noise std must be non-negative");
  ResponseEnsemble data;
  RandomSource design = rng.derive("design");
  data.inputs = latin_hypercube(n, sim.info().bounds, design);
  data.responses = sim.responses(data.inputs, exec);
  RandomSource noise = rng.derive("noise");
  add_noise(data.responses, noise_std, noise);
  data.grid = sim.info().grid;
  data.input_names = sim.info().names;
  return data;
}

}  // namespace kfdr
