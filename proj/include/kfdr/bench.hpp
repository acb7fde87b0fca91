#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "kfdr/core.hpp"
#include "kfdr/parallel.hpp"

namespace kfdr {

/// dy = f(t, y); dy is presized to y.size().
using OdeRhs = std::function<void(double t, const VectorXd& y, VectorXd& dy)>;

/// One classical fourth-order Runge-Kutta step.
VectorXd rk4_step(const OdeRhs& f, double t, const VectorXd& y, double h);

/// Fixed-step RK4 with `substeps` steps per grid interval. Row j is the state
/// at grid.node(j); row 0 is y0 exactly. Throws on a non-finite state.
MatrixXd rk4_integrate(const OdeRhs& f, const VectorXd& y0, const TimeGrid& grid, int substeps = 4);

inline constexpr int kDefaultSubsteps = 4;

// ----------------------------------------------------------- Duffing ----

struct DuffingParams {
  double alpha = 1.0;
  double beta = 2.0;
  double c = 1.0;
  double y0 = -5e-5;

  static constexpr double mass = 1.0;
  static constexpr double k = 1e4;
  static constexpr double k2 = 1e7;
  static constexpr double k3 = 5e9;
};

TimeGrid duffing_grid();
double duffing_excitation(const DuffingParams& p, double t);
/// Displacement on duffing_grid(), starting at rest from y0.
VectorXd duffing_response(const DuffingParams& p, int substeps = kDefaultSubsteps);

// ---------------------------------------------------------- Bouc-Wen ----

struct BoucWenParams {
  double m = 6e4;
  double c = 1e5;
  double k = 5e6;
  double alpha = 0.2;
  double y0 = 0.0;

  static constexpr double A = 1.0;
  static constexpr double beta = 7.8e3;
  static constexpr double gamma = 7.8e3;
  static constexpr int n = 3;
};

inline constexpr std::uint64_t kBoucWenExcitationSeed = 4242;

TimeGrid boucwen_grid();

/// Random-phase excitation -sqrt(0.006 pi m) sum_k [v_k cos(0.1 pi k t) +
/// v_{150+k} sin(0.1 pi k t)] with the 300 standard-normal coefficients v
/// fixed once. The m-free sum is tabulated at every half substep of the
/// integration grid.
class BoucWenExcitation {
 public:
  static constexpr int kTerms = 150;

  static BoucWenExcitation from_seed(std::uint64_t seed, int substeps = kDefaultSubsteps);
  static BoucWenExcitation from_coefficients(VectorXd coefficients, int substeps = kDefaultSubsteps);

  const VectorXd& coefficients() const noexcept { return coef_; }
  int substeps() const noexcept { return substeps_; }
  /// The sum without the mass prefactor, evaluated directly.
  double unit(double t) const;
  double force(double m, double t) const;
  /// Table lookup at a half-substep time of boucwen_grid().
  double tabulated_unit(double t) const;

 private:
  BoucWenExcitation() = default;
  VectorXd coef_;
  int substeps_ = kDefaultSubsteps;
  double t0_ = 0.0;
  double half_step_ = 0.0;
  VectorXd table_;
};

/// Displacement on boucwen_grid(); z(0) = 0, ydot(0) = 0. The substep count
/// is the excitation's.
VectorXd boucwen_response(const BoucWenParams& p, const BoucWenExcitation& excitation);

/// Full state (y, ydot, z) per grid node.
MatrixXd boucwen_states(const BoucWenParams& p, const BoucWenExcitation& excitation);

// ---------------------------------------------------------- datasets ----

enum class BenchModel { Duffing, BoucWen };

std::string to_string(BenchModel model);
BenchModel parse_bench_model(const std::string& s);

struct BenchInfo {
  std::vector<std::string> names;
  std::vector<std::pair<double, double>> bounds;
  TimeGrid grid{0.0, 1.0, 2};
};

/// Input names, sampling bounds and time grid of a benchmark.
BenchInfo bench_info(BenchModel model);

/// Curve for one input vector ordered as bench_info(model).names.
class BenchSimulator {
 public:
  explicit BenchSimulator(BenchModel model, std::uint64_t excitation_seed = kBoucWenExcitationSeed,
                          int substeps = kDefaultSubsteps);

  BenchModel model() const noexcept { return model_; }
  const BenchInfo& info() const noexcept { return info_; }
  const BoucWenExcitation& excitation() const noexcept { return excitation_; }

  VectorXd operator()(const VectorXd& x) const;
  /// Row i is the response at X.row(i); rows integrate concurrently.
  MatrixXd responses(const MatrixXd& X, Exec exec = kDefaultExec) const;

 private:
  BenchModel model_;
  BenchInfo info_;
  int substeps_;
  BoucWenExcitation excitation_;
};

/// Independent N(0, std^2) noise on every entry of the responses.
void add_noise(MatrixXd& responses, double noise_std, RandomSource& rng);

/// Latin-hypercube inputs within the benchmark bounds (stream "design"),
/// solved responses, optional output noise (stream "noise").
ResponseEnsemble generate_dataset(const BenchSimulator& sim, int n, RandomSource& rng,
                                  double noise_std = 0.0, Exec exec = kDefaultExec);

}  // namespace kfdr
