// Acceptance checks. `acceptance N` runs criterion N, `acceptance` runs all.
// Each check prints one [PASS]/[FAIL] line; the exit code is non-zero when
// any selected check fails.

#include <gsl/gsl_errno.h>
#include <gsl/gsl_linalg.h>
#include <gsl/gsl_odeiv2.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "kfdr/bench.hpp"
#include "kfdr/fpca.hpp"
#include "kfdr/kriging.hpp"
#include "kfdr/smoothing.hpp"
#include "kfdr/surrogate.hpp"
#include "kfdr/uq.hpp"

#ifndef KFDR_BINARY
#error "KFDR_BINARY must name the kfdr executable"
#endif

using namespace kfdr;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

class Checker {
 public:
  void expect(bool ok, const std::string& what) {
    if (!ok) {
      pass_ = false;
      failures_.push_back(what);
    }
  }
  void note(const std::string& s) { notes_.push_back(s); }
  Outcome outcome() const {
    std::ostringstream os;
    for (std::size_t i = 0; i < notes_.size(); ++i) os << (i ? "; " : "") << notes_[i];
    for (const auto& f : failures_) os << "; failed: " << f;
    return {pass_, os.str()};
  }

 private:
  bool pass_ = true;
  std::vector<std::string> failures_;
  std::vector<std::string> notes_;
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

double median(std::vector<double> v) { return quantile(std::move(v), 0.5); }

// ---------------------------------------------------------------- 1

Outcome fpca_oracle() {
  Checker c;
  const auto start = Clock::now();
  const TimeGrid g(0.0, 1.0, 101);
  const int n_b = 11, n = 40;
  const auto sys = BasisSystem::fourier(n_b, g.t0(), g.te());
  const MatrixXd H = design_matrix(sys, g);
  RandomSource r(11);
  MatrixXd C(n_b, n);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n_b; ++k) C(k, i) = r.normal() * std::pow(0.7, k);
  const MatrixXd Y = (H * C).transpose();

  ReducerOptions opt;
  opt.kind = BasisKind::Fourier;
  opt.n_b_fixed = n_b;
  opt.nb.tau_override = 0.0;
  opt.variance_threshold = 1.0;
  const auto red = FunctionalReducer::fit(Y, g, opt);

  const double w_err = (red.W() - MatrixXd::Identity(n_b, n_b)).cwiseAbs().maxCoeff();
  c.expect(w_err <= 1e-10, "W = I");

  // Dense PCA of the centered coefficient matrix.
  const MatrixXd Cc = C.colwise() - C.rowwise().mean();
  Eigen::JacobiSVD<MatrixXd> svd(Cc, Eigen::ComputeThinU);
  const VectorXd lambda = svd.singularValues().array().square() / (n - 1.0);
  const MatrixXd U = svd.matrixU();
  double lam_err = 0.0, score_err = 0.0;
  c.expect(red.eigenvalues().size() == n_b, "eigenvalue count");
  for (int k = 0; k < n_b; ++k) lam_err = std::max(lam_err, std::abs(red.eigenvalues()[k] - lambda[k]) / lambda[0]);
  const MatrixXd oracle_scores = Cc.transpose() * U;
  const double score_scale = oracle_scores.cwiseAbs().maxCoeff();
  for (int k = 0; k < red.latent_dim(); ++k) {
    const double sign = red.B().col(k).dot(U.col(k)) < 0 ? -1.0 : 1.0;
    score_err = std::max(score_err,
                         (red.training_scores().col(k) - sign * oracle_scores.col(k)).cwiseAbs().maxCoeff() / score_scale);
  }
  c.expect(red.latent_dim() == n_b, "all modes retained");
  c.expect(lam_err <= 1e-8, "eigenvalues");
  c.expect(score_err <= 1e-8, "scores");
  const double secs = seconds_since(start);
  c.expect(secs < 5.0, "runtime < 5 s");
  c.note("max |W - I| " + num(w_err) + ", eigenvalue rel err " + num(lam_err) + ", score rel err " +
         num(score_err) + ", " + num(secs) + " s");
  return c.outcome();
}

// ---------------------------------------------------------------- 2

void check_scores(Checker& c, const std::string& label, const MatrixXd& S, const VectorXd& lambda,
                  double fraction) {
  const Eigen::Index n = S.rows();
  double worst = 0.0;
  for (Eigen::Index k = 0; k < S.cols(); ++k) {
    const VectorXd col = S.col(k).array() - S.col(k).mean();
    const double var = col.squaredNorm() / static_cast<double>(n - 1);
    worst = std::max(worst, std::abs(var - lambda[k]) / lambda[k]);
  }
  c.expect(fraction >= 0.99, label + " variance fraction " + num(fraction));
  c.expect(S.cols() >= 1, label + " has modes");
  c.expect(worst <= 1e-6, label + " score variance rel err " + num(worst));
  c.note(label + ": m=" + std::to_string(S.cols()) + " frac " + num(fraction) + " var err " + num(worst));
}

Outcome variance_accounting() {
  Checker c;
  for (auto model : {BenchModel::Duffing, BenchModel::BoucWen}) {
    const BenchSimulator sim(model);
    RandomSource r(21);
    const auto data = generate_dataset(sim, model == BenchModel::Duffing ? 100 : 60, r);
    for (auto kind : {ReducerKind::KfdrFourier, ReducerKind::KfdrBSpline, ReducerKind::Pca}) {
      const std::string label = to_string(model) + "/" + to_string(kind);
      const auto cfg = SurrogateConfig::defaults(kind);
      if (kind == ReducerKind::Pca) {
        const auto red = PcaReducer::fit(data.responses, cfg.pca_threshold);
        check_scores(c, label, red.project_rows(data.responses), red.eigenvalues(), red.variance_fraction());
      } else {
        const auto red = FunctionalReducer::fit(data.responses, data.grid, cfg.functional);
        check_scores(c, label, red.training_scores(), red.eigenvalues(), red.variance_fraction());
      }
    }
  }
  return c.outcome();
}

// ---------------------------------------------------------------- 3

MatrixXd dense_cov(const MatrixXd& X, const KrigingHyper& h) {
  const auto n = X.rows();
  MatrixXd A(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      double s = 0.0;
      for (Eigen::Index d = 0; d < X.cols(); ++d) s += h.theta[d] * (X(i, d) - X(j, d)) * (X(i, d) - X(j, d));
      A(i, j) = h.sigma_z2 * std::exp(-s) + (i == j ? h.sigma_n2 : 0.0);
    }
  return A;
}

// Gaussian log density of y under N(mu 1, A) via GSL LU.
double lu_log_likelihood(const MatrixXd& A, const VectorXd& y, double mu) {
  const auto n = static_cast<std::size_t>(y.size());
  gsl_matrix* M = gsl_matrix_alloc(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) gsl_matrix_set(M, i, j, A(i, j));
  gsl_permutation* perm = gsl_permutation_alloc(n);
  int sign = 0;
  gsl_linalg_LU_decomp(M, perm, &sign);
  gsl_vector* res = gsl_vector_alloc(n);
  gsl_vector* sol = gsl_vector_alloc(n);
  for (std::size_t i = 0; i < n; ++i) gsl_vector_set(res, i, y[i] - mu);
  gsl_linalg_LU_solve(M, perm, res, sol);
  double quad = 0.0;
  for (std::size_t i = 0; i < n; ++i) quad += gsl_vector_get(res, i) * gsl_vector_get(sol, i);
  const double logdet = gsl_linalg_LU_lndet(M);
  gsl_vector_free(res);
  gsl_vector_free(sol);
  gsl_permutation_free(perm);
  gsl_matrix_free(M);
  return -0.5 * quad - 0.5 * logdet - 0.5 * static_cast<double>(n) * std::log(2 * std::numbers::pi);
}

struct Sample {
  MatrixXd X;
  VectorXd y;
};

Sample smooth_sample(int n, std::uint64_t seed) {
  RandomSource r(seed);
  const std::pair<double, double> box[] = {{0.0, 1.0}, {0.0, 1.0}};
  Sample s;
  s.X = latin_hypercube(n, box, r);
  s.y.resize(n);
  for (int i = 0; i < n; ++i) s.y[i] = 3.0 + std::sin(3.0 * s.X(i, 0)) + s.X(i, 1) * s.X(i, 1);
  return s;
}

Outcome kriging_interpolation() {
  Checker c;
  double worst_mean = 0.0, worst_var = 0.0, worst_ll = 0.0;
  for (int n : {5, 8, 20}) {
    const Sample s = smooth_sample(n, 30 + n);
    KrigingOptions opt;
    opt.fix_nugget = 0.0;
    RandomSource r(31);
    const auto m = KrigingModel::fit(s.X, s.y, InputScaling::from_data(s.X), opt, r);
    c.expect(m.hyper().sigma_n2 == 0.0, "nugget pinned");
    const double sz2 = m.hyper().sigma_z2 * m.state().y_scale * m.state().y_scale;
    for (int i = 0; i < n; ++i) {
      const auto p = m.predict(s.X.row(i).transpose());
      worst_mean = std::max(worst_mean, std::abs(p.mean - s.y[i]) / std::abs(s.y[i]));
      worst_var = std::max(worst_var, p.variance / sz2);
    }
    if (n > 8) continue;
    // Fitted likelihood plus a spread of fixed hyperparameters.
    const auto& st = m.state();
    std::vector<KrigingHyper> hypers{st.hyper};
    for (double th : {0.3, 2.0, 10.0})
      for (double sn : {0.0, 1e-3, 0.1}) {
        KrigingHyper h;
        h.theta = VectorXd::Constant(2, th);
        h.theta[1] *= 0.5;
        h.sigma_z2 = 1.3;
        h.sigma_n2 = sn;
        hypers.push_back(h);
      }
    for (const auto& h : hypers) {
      const double mu = 0.37;
      const double ours = log_marginal_likelihood(st.X_norm, st.y_std, mu, h);
      const double ref = lu_log_likelihood(dense_cov(st.X_norm, h), st.y_std, mu);
      worst_ll = std::max(worst_ll, std::abs(ours - ref) / std::max(1.0, std::abs(ref)));
    }
    const double ref_fit = lu_log_likelihood(dense_cov(st.X_norm, st.hyper), st.y_std, m.mu());
    worst_ll = std::max(worst_ll, std::abs(m.log_likelihood() - ref_fit) / std::max(1.0, std::abs(ref_fit)));
  }
  c.expect(worst_mean <= 1e-6, "training predictions");
  c.expect(worst_var <= 1e-8, "training variance");
  c.expect(worst_ll <= 1e-10, "likelihood oracle");
  c.note("mean rel err " + num(worst_mean) + ", variance/sigma_Z^2 " + num(worst_var) +
         ", likelihood rel err " + num(worst_ll));
  return c.outcome();
}

// ---------------------------------------------------------------- 4

Outcome forward_oracle() {
  Checker c;
  const auto start = Clock::now();
  const TimeGrid g(0.0, 1.0, 101);
  const VectorXd t = g.nodes();
  const CurveModel model = [t](const VectorXd& x) -> VectorXd { return x[0] * t.array() + x[1]; };
  InputDistribution dist;
  dist.marginals = {Marginal::normal(0.0, 1.0), Marginal::normal(0.0, 1.0)};
  dist.names = {"x1", "x2"};
  ForwardUqOptions opt;
  opt.n_mcs = 100000;
  RandomSource r(41);
  const auto res = forward_uq(model, g, dist, opt, r);
  double mean_err = 0.0, std_err = 0.0;
  for (int j = 0; j < g.size(); ++j) {
    mean_err = std::max(mean_err, std::abs(res.mean[j]));
    std_err = std::max(std_err, std::abs(res.std[j] / std::sqrt(t[j] * t[j] + 1.0) - 1.0));
  }
  const double secs = seconds_since(start);
  c.expect(res.n_mcs == 100000, "sample count");
  c.expect(mean_err <= 0.02, "mean");
  c.expect(std_err <= 0.02, "std");
  c.expect(secs < 30.0, "runtime < 30 s");
  c.note("max |mean| " + num(mean_err) + ", max std rel err " + num(std_err) + ", " + num(secs) + " s");
  return c.outcome();
}

// ---------------------------------------------------------------- 5

Outcome inverse_oracle() {
  Checker c;
  const auto start = Clock::now();
  const TimeGrid g(0.0, 1.0, 21);
  const VectorXd t = g.nodes();
  const double sigma = 0.2;
  const VectorXd truth = (VectorXd(2) << 1.4, -0.3).finished();
  const VectorXd m0 = (VectorXd(2) << 1.0, 0.0).finished();
  const VectorXd s0 = (VectorXd(2) << 0.5, 0.5).finished();

  CalibrationProblem prob;
  prob.model = [t](const VectorXd& x) -> VectorXd { return x[0] * t.array() + x[1]; };
  prob.prior.marginals = {Marginal::normal(m0[0], s0[0]), Marginal::normal(m0[1], s0[1])};
  prob.prior.names = {"slope", "offset"};
  prob.known_sigma = sigma;
  RandomSource r(51);
  RandomSource noise = r.derive("observations");
  const int n_obs = 2;
  prob.observations.resize(n_obs, g.size());
  for (int i = 0; i < n_obs; ++i)
    for (int j = 0; j < g.size(); ++j) prob.observations(i, j) = truth[0] * t[j] + truth[1] + sigma * noise.normal();

  // Conjugate posterior of the linear-Gaussian model.
  MatrixXd H(g.size(), 2);
  H.col(0) = t;
  H.col(1).setOnes();
  const MatrixXd prior_prec = s0.array().square().inverse().matrix().asDiagonal();
  const MatrixXd prec = prior_prec + n_obs * H.transpose() * H / (sigma * sigma);
  const VectorXd ysum = prob.observations.colwise().sum().transpose();
  const MatrixXd cov = prec.inverse();
  const VectorXd post_mean = cov * (prior_prec * m0 + H.transpose() * ysum / (sigma * sigma));

  McmcOptions mo;
  mo.walkers = 100;
  mo.iterations = 2000;
  RandomSource chain = r.derive("mcmc");
  const auto post = ensemble_mcmc(
      [&](const VectorXd& th) { return prob(th); }, [&](RandomSource& rr) { return prob.sample_prior(rr); },
      prob.dims(), mo, chain);

  double mean_err = 0.0, std_err = 0.0;
  for (int k = 0; k < 2; ++k) {
    const VectorXd col = post.draws.col(k);
    const double mean = col.mean();
    const double sd = std::sqrt((col.array() - mean).square().sum() / static_cast<double>(col.size() - 1));
    mean_err = std::max(mean_err, std::abs(mean - post_mean[k]) / std::abs(post_mean[k]));
    std_err = std::max(std_err, std::abs(sd / std::sqrt(cov(k, k)) - 1.0));
  }
  const double secs = seconds_since(start);
  c.expect(mean_err <= 0.02, "posterior mean");
  c.expect(std_err <= 0.10, "posterior std");
  c.expect(secs < 60.0, "runtime < 60 s");
  c.note("mean rel err " + num(mean_err) + ", std rel err " + num(std_err) + ", acceptance " +
         num(post.acceptance_rate) + ", " + num(secs) + " s");
  return c.outcome();
}

// ---------------------------------------------------------------- 6, 7

cli::Json duffing_study(const std::vector<std::string>& methods, double noise) {
  cli::Json cfg = cli::resolve_config(cli::Json::object(), std::string("duffing"));
  cfg["study"]["n_train"] = {100};
  cfg["study"]["repetitions"] = 10;
  cfg["study"]["n_test"] = 1000;
  cfg["study"]["noise"] = noise;
  cfg["study"]["methods"] = methods;
  return cfg;
}

std::vector<double> errors_of(const std::vector<cli::StudyRow>& rows, const std::string& method) {
  std::vector<double> out;
  for (const auto& r : rows)
    if (r.method == method) out.push_back(r.nrmse);
  return out;
}

std::string list(const std::vector<double>& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + num(v[i]);
  return s + "]";
}

Outcome study_kfdr_vs_pca() {
  Checker c;
  const auto start = Clock::now();
  const auto rows = cli::run_study(duffing_study({"kfdr-b", "pca"}, 0.0), 1);
  const auto kb = errors_of(rows, "kfdr-b"), pca = errors_of(rows, "pca");
  const double secs = seconds_since(start);
  c.expect(kb.size() == 10 && pca.size() == 10, "ten repetitions per method");
  c.expect(median(kb) < median(pca), "kfdr-b median < pca median");
  c.expect(secs < 600.0, "runtime < 10 min");
  c.note("median kfdr-b " + num(median(kb)) + " vs pca " + num(median(pca)) + ", " + num(secs) + " s");
  c.note("kfdr-b " + list(kb) + ", pca " + list(pca));
  return c.outcome();
}

Outcome study_gcv_vs_tau0() {
  Checker c;
  const auto start = Clock::now();
  const auto rows = cli::run_study(duffing_study({"kfdr-b", "kfdr-b-tau0"}, 1e-4), 1);
  const auto gcv = errors_of(rows, "kfdr-b"), zero = errors_of(rows, "kfdr-b-tau0");
  const double secs = seconds_since(start);
  c.expect(gcv.size() == 10 && zero.size() == 10, "ten repetitions per method");
  c.expect(median(gcv) <= median(zero), "GCV median <= tau = 0 median");
  c.note("median GCV " + num(median(gcv)) + " vs tau=0 " + num(median(zero)) + ", " + num(secs) + " s");
  c.note("GCV " + list(gcv) + ", tau=0 " + list(zero));
  return c.outcome();
}

// ---------------------------------------------------------------- 8

double exp_error(int nodes) {
  const OdeRhs f = [](double, const VectorXd& y, VectorXd& dy) { dy = y; };
  const MatrixXd Y = rk4_integrate(f, VectorXd::Ones(1), TimeGrid(0.0, 1.0, nodes), 1);
  return std::abs(Y(nodes - 1, 0) - std::exp(1.0));
}

struct LinearOscillator {
  double m, c, k;
  const BoucWenExcitation* excitation;
};

int linear_rhs(double t, const double y[], double dy[], void* params) {
  const auto* p = static_cast<const LinearOscillator*>(params);
  dy[0] = y[1];
  dy[1] = (p->excitation->force(p->m, t) - p->c * y[1] - p->k * y[0]) / p->m;
  return GSL_SUCCESS;
}

Outcome solver_validity() {
  Checker c;
  const double ratio = exp_error(11) / exp_error(21);
  c.expect(ratio >= 12.0 && ratio <= 20.0, "RK4 order ratio");

  const auto e = BoucWenExcitation::from_seed(kBoucWenExcitationSeed);
  double worst = 0.0;
  for (const BoucWenParams bp : {BoucWenParams{6e4, 1e5, 5e6, 1.0, 0.01}, BoucWenParams{7e4, 1.05e5, 4.77e6, 1.0, 0.0}}) {
    const VectorXd y = boucwen_response(bp, e);
    LinearOscillator p{bp.m, bp.c, bp.k, &e};
    gsl_odeiv2_system sys{linear_rhs, nullptr, 2, &p};
    gsl_odeiv2_driver* d = gsl_odeiv2_driver_alloc_y_new(&sys, gsl_odeiv2_step_rk8pd, 1e-4, 1e-13, 1e-13);
    const TimeGrid g = boucwen_grid();
    double st[2] = {bp.y0, 0.0};
    double tt = g.t0();
    worst = std::max(worst, std::abs(y[0] - bp.y0));
    for (int j = 1; j < g.size(); ++j) {
      gsl_odeiv2_driver_apply(d, &tt, g.node(j), st);
      worst = std::max(worst, std::abs(y[j] - st[0]));
    }
    gsl_odeiv2_driver_free(d);
  }
  c.expect(worst <= 1e-6, "Bouc-Wen linear limit");

  bool exact = true;
  for (double a : {0.8, 1.0, 1.19, 1.234567}) {
    DuffingParams p;
    p.alpha = a;
    exact = exact && duffing_excitation(p, 0.0) == a;
  }
  c.expect(exact, "Duffing f(0) = alpha");
  c.note("order ratio " + num(ratio) + ", Bouc-Wen max dev " + num(worst));
  return c.outcome();
}

// ---------------------------------------------------------------- 9

int sh(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(KFDR_BINARY) + " " + args + " >>" + log.string() + " 2>&1";
  return std::system(cmd.c_str());
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism() {
  Checker c;
  const fs::path root = fs::temp_directory_path() / "kfdr_acceptance_determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  cli::Json cfg = {{"model", "duffing"},
                   {"generate", {{"n", 30}}},
                   {"kriging", {{"n_starts", 3}, {"budget", 200}}},
                   {"study", {{"n_train", {10, 20}}, {"repetitions", 2}, {"n_test", 40},
                              {"methods", {"kfdr-f", "kfdr-b", "pca"}}}},
                   {"forward", {{"n_mcs", 3000}, {"kde_points", 128}}},
                   {"inverse", {{"walkers", 16}, {"iterations", 40}}}};
  const fs::path cfg_path = root / "config.json";
  std::ofstream(cfg_path) << cfg.dump(2);

  for (const char* run : {"a", "b"}) {
    const fs::path d = root / run;
    fs::create_directories(d);
    const std::string common = " --config " + cfg_path.string() + " --seed 9 --out " + d.string();
    const fs::path log = root / (std::string(run) + ".log");
    int rc = sh("generate" + common, log);
    rc |= sh("fit" + common + " --inputs " + (d / "inputs.csv").string() + " --responses " +
                 (d / "responses.csv").string(),
             log);
    rc |= sh("study" + common, log);
    rc |= sh("forward" + common + " --model-file " + (d / "model.json").string(), log);
    rc |= sh("inverse" + common + " --model-file " + (d / "model.json").string(), log);
    const std::string exact = " --config " + cfg_path.string() + " --seed 9 --exact --out " + (d / "exact").string();
    rc |= sh("forward" + exact, log);
    rc |= sh("inverse" + exact, log);
    c.expect(rc == 0, std::string("run ") + run + " exit status (see " + log.string() + ")");
  }

  int compared = 0;
  for (const auto& entry : fs::recursive_directory_iterator(root / "a")) {
    if (!entry.is_regular_file()) continue;
    const auto ext = entry.path().extension();
    if (ext != ".csv" && ext != ".json") continue;
    const fs::path other = root / "b" / fs::relative(entry.path(), root / "a");
    const bool same = fs::exists(other) && slurp(entry.path()) == slurp(other);
    c.expect(same, fs::relative(entry.path(), root / "a").string() + " differs");
    ++compared;
  }
  for (const char* f : {"study.csv", "mean_std.csv", "extremes_kde.csv", "posterior_draws.csv",
                        "posterior_summary.csv", "exact/mean_std.csv", "exact/posterior_draws.csv"})
    c.expect(fs::exists(root / "a" / f), std::string(f) + " missing");
  c.note(std::to_string(compared) + " files compared");
  if (c.outcome().pass) fs::remove_all(root);
  return c.outcome();
}

// ---------------------------------------------------------------- 10

// Independent transcription of the basis-count search with every smoother
// formed explicitly: S = H (H^T H + tau R)^{-1} H^T, n_t x n_t.
struct OracleRound {
  int n_b = 0;
  int tau_index = 0;
  double tau = 0.0;
  double delta = 0.0;
  double rel = 0.0;
  bool stop = false;
  std::vector<double> gcv;
};

OracleRound oracle_round(const BasisSpec& spec, int n_b, const MatrixXd& Yc, std::span<const double> nodes,
                         int n_tau) {
  const BasisSystem sys = spec.make(n_b);
  const MatrixXd H = design_matrix(sys, nodes);
  const MatrixXd R = roughness_matrix(sys);
  const MatrixXd Yt = Yc.transpose();  // n_t x N
  const double N = static_cast<double>(Yc.rows());
  OracleRound out;
  out.n_b = n_b;
  double best = std::numeric_limits<double>::infinity();
  MatrixXd best_fit;
  for (int i = 1; i <= n_tau; ++i) {
    const double tau = std::pow(10.0, -6.0 + 12.0 * (i - 1) / (n_tau - 1));
    const MatrixXd M = H.transpose() * H + tau * R;
    const MatrixXd S = H * M.fullPivLu().solve(H.transpose());
    const MatrixXd fit = S * Yt;
    const double sse = (Yt - fit).squaredNorm();
    const double denom = N - S.trace();
    const double v = denom == 0.0 ? std::numeric_limits<double>::infinity() : N / (denom * denom) * sse;
    out.gcv.push_back(v);
    if (v < best) {
      best = v;
      out.tau_index = i - 1;
      out.tau = tau;
      best_fit = fit;
    }
  }
  double sum = 0.0;
  for (Eigen::Index k = 0; k < Yt.cols(); ++k) {
    const double range = Yt.col(k).maxCoeff() - Yt.col(k).minCoeff();
    if (range > 0.0) sum += (Yt.col(k) - best_fit.col(k)).norm() / range;
  }
  out.delta = sum / N;
  return out;
}

void check_selection(Checker& c, double noise) {
  const BenchSimulator sim(BenchModel::Duffing);
  RandomSource r(1001);
  const auto data = generate_dataset(sim, 100, r, noise);
  ReducerOptions opt;  // cubic B-splines, n_b0 = 8, delta_r = 0.05, 25 tau values
  const auto red = FunctionalReducer::fit(data.responses, data.grid, opt);
  const auto& trace = red.selection().trace;

  const CenteredData cd = center_ensemble(data.responses);
  const VectorXd nodes = data.grid.nodes();
  const std::span<const double> ns(nodes.data(), static_cast<std::size_t>(nodes.size()));
  const BasisSpec spec{opt.kind, data.grid.t0(), data.grid.te(), opt.order};

  // Algorithm: N_b <- N_b0; delta_1 from round 0; then N_b <- N_b + k N_b0
  // until |delta_1 - delta_2| / delta_2 < delta_r.
  std::vector<OracleRound> oracle;
  const int n_b0 = opt.nb.n_b0;
  int n_b = n_b0;
  oracle.push_back(oracle_round(spec, n_b, cd.centered, ns, opt.nb.n_tau));
  double delta1 = oracle.back().delta;
  for (int k = 1; k < 40; ++k) {
    n_b = n_b + k * n_b0;
    OracleRound o = oracle_round(spec, n_b, cd.centered, ns, opt.nb.n_tau);
    const double delta2 = o.delta;
    o.rel = std::abs(delta1 - delta2) / delta2;
    o.stop = o.rel < opt.nb.delta_r;
    oracle.push_back(o);
    if (o.stop) break;
    delta1 = delta2;
  }

  std::ostringstream log;
  double worst_delta = 0.0, worst_gcv = 0.0;
  c.expect(trace.size() == oracle.size(), "round count " + std::to_string(trace.size()) + " vs " +
                                              std::to_string(oracle.size()));
  for (std::size_t i = 0; i < std::min(trace.size(), oracle.size()); ++i) {
    const auto& t = trace[i];
    const auto& o = oracle[i];
    log << " [" << t.n_b << " tau=" << num(t.tau) << " delta=" << num(t.delta) << " rel=" << num(t.rel_change)
        << (t.stop ? " stop" : "") << "]";
    c.expect(t.n_b == o.n_b, "round " + std::to_string(i) + " n_b");
    c.expect(std::abs(t.tau / o.tau - 1.0) < 1e-12, "round " + std::to_string(i) + " tau");
    c.expect(t.stop == o.stop, "round " + std::to_string(i) + " stop");
    if (i > 0) c.expect(std::abs(t.rel_change - o.rel) <= 1e-6 * std::max(1e-3, o.rel), "round " + std::to_string(i) + " rel");
    worst_delta = std::max(worst_delta, std::abs(t.delta - o.delta) / o.delta);

    // select_tau on the same round: grid argmin, checked against every grid point.
    const BasisSystem sys = spec.make(t.n_b);
    const MatrixXd H = design_matrix(sys, ns);
    const MatrixXd R = roughness_matrix(sys);
    const auto sel = select_tau(H, R, cd.centered, opt.nb.n_tau);
    bool argmin = true;
    for (std::size_t j = 0; j < sel.gcv.size(); ++j) {
      argmin = argmin && sel.gcv[sel.best] <= sel.gcv[j];
      if (j < sel.best) argmin = argmin && sel.gcv[sel.best] < sel.gcv[j];
      worst_gcv = std::max(worst_gcv, std::abs(sel.gcv[j] - o.gcv[j]) / o.gcv[j]);
    }
    c.expect(argmin, "round " + std::to_string(i) + " select_tau is the grid argmin");
    c.expect(static_cast<int>(sel.best) == o.tau_index, "round " + std::to_string(i) + " select_tau index");
    c.expect(sel.tau == t.tau, "round " + std::to_string(i) + " trace tau equals select_tau");
  }
  c.expect(worst_delta <= 1e-8, "delta agreement");
  c.expect(worst_gcv <= 1e-6, "GCV agreement");
  c.expect(red.state().n_b == trace.back().n_b && red.tau() == trace.back().tau, "returned (n_b, tau)");
  c.note("noise " + num(noise) + " trace" + log.str() + ", delta rel dev " + num(worst_delta) +
         ", GCV rel dev " + num(worst_gcv));
}

Outcome algorithm_fidelity() {
  Checker c;
  for (double noise : {0.0, 1e-5}) check_selection(c, noise);
  return c.outcome();
}

struct Criterion {
  const char* name;
  std::function<Outcome()> run;
};

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> all{
      {"FPCA matches coefficient PCA (Fourier, tau = 0)", fpca_oracle},
      {"variance accounting of every reducer", variance_accounting},
      {"Kriging interpolation and likelihood oracle", kriging_interpolation},
      {"forward UQ on the linear toy", forward_oracle},
      {"inverse UQ against the conjugate posterior", inverse_oracle},
      {"Duffing study: KFDR-B median below PCA", study_kfdr_vs_pca},
      {"Duffing noisy study: GCV tau not worse than tau = 0", study_gcv_vs_tau0},
      {"ODE solver validity", solver_validity},
      {"CLI reruns are byte-identical", determinism},
      {"tau and basis-count selection follow the algorithms", algorithm_fidelity},
  };
  return all;
}

}  // namespace

int main(int argc, char** argv) {
  gsl_set_error_handler_off();
  std::vector<int> which;
  for (int i = 1; i < argc; ++i) which.push_back(std::atoi(argv[i]));
  if (which.empty())
    for (int i = 1; i <= static_cast<int>(criteria().size()); ++i) which.push_back(i);

  int failed = 0;
  for (int id : which) {
    if (id < 1 || id > static_cast<int>(criteria().size())) {
      std::cerr << "unknown criterion " << id << "\n";
      return 2;
    }
    const auto& cr = criteria()[id - 1];
    Outcome o;
    try {
      o = cr.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::cout << (o.pass ? "[PASS] " : "[FAIL] ") << id << ". " << cr.name << " -- " << o.detail << std::endl;
    if (!o.pass) ++failed;
  }
  return failed ? 1 : 0;
}
