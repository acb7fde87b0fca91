// Serial reference versus OpenMP for the data-parallel kernels.
// Range argument 0 = Exec::Serial, 1 = Exec::Parallel.

#include <benchmark/benchmark.h>

#include "kfdr/bench.hpp"
#include "kfdr/smoothing.hpp"
#include "kfdr/surrogate.hpp"
#include "kfdr/uq.hpp"

using namespace kfdr;

namespace {

Exec exec_of(const benchmark::State& st) { return st.range(0) ? Exec::Parallel : Exec::Serial; }

const ResponseEnsemble& duffing_data() {
  static const ResponseEnsemble d = [] {
    RandomSource r(1);
    return generate_dataset(BenchSimulator(BenchModel::Duffing), 60, r);
  }();
  return d;
}

const LatentSurrogate& duffing_surrogate() {
  static const LatentSurrogate s = [] {
    auto cfg = SurrogateConfig::defaults(ReducerKind::Pca);
    cfg.kriging.n_starts = 3;
    RandomSource r(2);
    return LatentSurrogate::fit(duffing_data(), cfg, r);
  }();
  return s;
}

void BM_DuffingResponses(benchmark::State& st) {
  const BenchSimulator sim(BenchModel::Duffing);
  RandomSource r(3);
  const MatrixXd X = latin_hypercube(32, sim.info().bounds, r);
  for (auto _ : st) benchmark::DoNotOptimize(sim.responses(X, exec_of(st)));
}

void BM_SelectTau(benchmark::State& st) {
  const auto& d = duffing_data();
  const auto cd = center_ensemble(d.responses);
  const BasisSystem sys = BasisSpec{BasisKind::BSpline, 0.0, 2.0, 4}.make(64);
  const MatrixXd H = design_matrix(sys, d.grid);
  const MatrixXd R = roughness_matrix(sys);
  for (auto _ : st) benchmark::DoNotOptimize(select_tau(H, R, cd.centered, 25, exec_of(st)));
}

void BM_KrigingFit(benchmark::State& st) {
  const auto& d = duffing_data();
  const VectorXd y = d.responses.col(200);
  KrigingOptions opt;
  opt.n_starts = 4;
  opt.budget = 200;
  for (auto _ : st) {
    RandomSource r(4);
    benchmark::DoNotOptimize(KrigingModel::fit(d.inputs, y, InputScaling::from_data(d.inputs), opt, r, exec_of(st)));
  }
}

void BM_LatentMeans(benchmark::State& st) {
  const auto& s = duffing_surrogate();
  RandomSource r(5);
  const MatrixXd X = latin_hypercube(2000, BenchSimulator(BenchModel::Duffing).info().bounds, r);
  for (auto _ : st) benchmark::DoNotOptimize(s.latent_means(X, exec_of(st)));
}

void BM_ForwardUq(benchmark::State& st) {
  const auto& s = duffing_surrogate();
  InputDistribution dist;
  dist.marginals = {Marginal::normal(1.0, 0.05), Marginal::normal(2.0, 0.1), Marginal::normal(1.0, 0.05),
                    Marginal::normal(-5e-5, 5e-6)};
  dist.names = s.input_names();
  ForwardUqOptions opt;
  opt.n_mcs = 5000;
  opt.kde_points = 256;
  for (auto _ : st) {
    RandomSource r(6);
    benchmark::DoNotOptimize(forward_uq(s, dist, opt, r, exec_of(st)));
  }
}

}  // namespace

BENCHMARK(BM_DuffingResponses)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SelectTau)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_KrigingFit)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_LatentMeans)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ForwardUq)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
