#include "cli.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "kfdr/error.hpp"
#include "kfdr/io.hpp"

namespace kfdr::cli {

namespace {

Json marginal_json(const std::string& name, const char* kind, double a, double b) {
  return Json{{"name", name}, {"kind", kind}, {"a", a}, {"b", b}};
}

Json common_defaults() {
  Json c;
  c["seed"] = 1;
  c["excitation_seed"] = kBoucWenExcitationSeed;
  c["data"] = {{"inputs", "inputs.csv"}, {"responses", "responses.csv"}};
  c["basis"] = Json::object();
  c["smoothing"] = {{"n_tau", 25}, {"delta_r", 0.05}, {"tau_override", nullptr}};
  c["kriging"] = {{"n_starts", 10}, {"budget", 400}, {"nugget", nullptr}};
  c["surrogate"] = {{"reducer", "kfdr-b"}, {"variance_threshold", 0.99}};
  c["predict"] = {{"model_file", "model.json"}, {"inputs", "inputs.csv"}};
  c["study"] = {{"n_train", {20, 40, 60, 80, 100}},
                {"repetitions", 10},
                {"n_test", 1000},
                {"noise", 0.0},
                {"methods", {"kfdr-f", "kfdr-b", "pca"}}};
  return c;
}

double get_double(const Json& j, const char* key) {
  if (!j.contains(key)) throw Error("cli", std::string("missing config key '") + key + "'");
  return j.at(key).get<double>();
}

fs::path resolve_path(const Json& j, const char* section, const char* key) {
  if (!j.contains(section) || !j.at(section).contains(key) || j.at(section).at(key).is_null())
    throw Error("cli", std::string("missing config key '") + section + "." + key + "'");
  return j.at(section).at(key).get<std::string>();
}

std::string csv_row(std::initializer_list<double> values) {
  std::string s;
  bool first = true;
  for (double v : values) {
    if (!first) s += ',';
    s += format_number(v);
    first = false;
  }
  return s + '\n';
}

void write_config_copy(const Json& cfg, std::uint64_t seed, const fs::path& out) {
  Json c = cfg;
  c["seed"] = seed;
  write_file_atomic(out / "config.json", c.dump(2) + "\n");
}

BenchModel model_of(const Json& cfg) { return parse_bench_model(cfg.at("model").get<std::string>()); }

BenchSimulator simulator_of(const Json& cfg) {
  return BenchSimulator(model_of(cfg), cfg.at("excitation_seed").get<std::uint64_t>());
}

void write_excitation(const BenchSimulator& sim, const fs::path& out) {
  if (sim.model() != BenchModel::BoucWen) return;
  CsvTable t;
  t.header = {"coefficient"};
  t.values = sim.excitation().coefficients();
  write_csv(out / "excitation.csv", t);
}

MatrixXd curve_table(const TimeGrid& grid, const MatrixXd& rows) {
  MatrixXd m(rows.rows() + 1, grid.size());
  m.row(0) = grid.nodes().transpose();
  m.bottomRows(rows.rows()) = rows;
  return m;
}

}  // namespace

Json default_config(BenchModel model) {
  Json c = common_defaults();
  c["model"] = to_string(model);
  Json dist = Json::array();
  Json truth = Json::object();
  Json fixed = Json::object();
  if (model == BenchModel::Duffing) {
    dist.push_back(marginal_json("alpha", "normal", 1.0, 0.05));
    dist.push_back(marginal_json("beta", "normal", 2.0, 0.1));
    dist.push_back(marginal_json("c", "normal", 1.0, 0.05));
    dist.push_back(marginal_json("y0", "normal", -5e-5, 5e-6));
    truth = {{"alpha", 1.19}, {"beta", 1.82}, {"c", 0.94}, {"y0", -3.3e-5}};
    c["generate"] = {{"n", 100}, {"noise", 0.0}};
    c["inverse"] = {{"noise", 1e-5}, {"sigma_prior", {1e-7, 1e-3}}};
  } else {
    dist.push_back(marginal_json("m", "lognormal", 6e4, 3e3));
    dist.push_back(marginal_json("c", "lognormal", 1e5, 3e3));
    dist.push_back(marginal_json("k", "lognormal", 5e6, 1e5));
    dist.push_back(marginal_json("alpha", "normal", 0.2, 0.01));
    dist.push_back(marginal_json("y0", "normal", 0.0, 0.002));
    truth = {{"m", 7e4}, {"c", 1.05e5}, {"k", 4.77e6}, {"alpha", 0.21}, {"y0", 0.01}};
    fixed = {{"m", 7e4}};
    c["generate"] = {{"n", 110}, {"noise", 0.0}};
    c["inverse"] = {{"noise", 5e-3}, {"sigma_prior", {1e-4, 1e-1}}};
  }
  c["forward"] = {{"model_file", "model.json"}, {"exact", false}, {"n_mcs", 100000},
                  {"kde_points", 1024}, {"distributions", dist}};
  Json& inv = c["inverse"];
  inv["model_file"] = "model.json";
  inv["exact"] = false;
  inv["observations"] = nullptr;
  inv["truth"] = truth;
  inv["n_observations"] = 3;
  inv["fixed"] = fixed;
  inv["prior"] = nullptr;  // uniform over the sampling bounds
  inv["known_sigma"] = nullptr;
  inv["walkers"] = 100;
  inv["iterations"] = 300;
  inv["burn_in"] = 0.5;
  return c;
}

Json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cli", "cannot open config " + path.string());
  try {
    return Json::parse(in, nullptr, true, true);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error("cli", "cannot parse " + path.string() + ": " + e.what());
  }
}

Json resolve_config(const Json& user, const std::optional<std::string>& model_flag) {
  std::string model = "duffing";
  if (model_flag) model = *model_flag;
  else if (user.contains("model")) model = user.at("model").get<std::string>();
  Json c = default_config(parse_bench_model(model));
  c.merge_patch(user);
  c["model"] = model;
  return c;
}

SurrogateConfig surrogate_config(const Json& cfg, ReducerKind kind) {
  SurrogateConfig sc = SurrogateConfig::defaults(kind);
  const Json& basis = cfg.contains("basis") ? cfg.at("basis") : Json::object();
  const Json& smooth = cfg.contains("smoothing") ? cfg.at("smoothing") : Json::object();
  const Json& krig = cfg.contains("kriging") ? cfg.at("kriging") : Json::object();
  const Json& sur = cfg.contains("surrogate") ? cfg.at("surrogate") : Json::object();

  // Flat basis keys apply to the functional variant named by basis.kind, or
  // to both when basis.kind is absent.
  bool applies = kind != ReducerKind::Pca;
  if (applies && basis.contains("kind") && !basis.at("kind").is_null()) {
    const BasisKind bk = parse_basis_kind(basis.at("kind").get<std::string>());
    applies = (bk == BasisKind::Fourier) == (kind == ReducerKind::KfdrFourier);
  }
  if (applies) {
    if (basis.contains("n_b0")) sc.functional.nb.n_b0 = basis.at("n_b0").get<int>();
    if (basis.contains("order")) sc.functional.order = basis.at("order").get<int>();
    if (basis.contains("mirror")) sc.functional.mirror = basis.at("mirror").get<bool>();
    if (basis.contains("n_b") && !basis.at("n_b").is_null())
      sc.functional.n_b_fixed = basis.at("n_b").get<int>();
    if (smooth.contains("n_b0") && !smooth.at("n_b0").is_null())
      sc.functional.nb.n_b0 = smooth.at("n_b0").get<int>();
  }
  if (smooth.contains("n_tau")) sc.functional.nb.n_tau = smooth.at("n_tau").get<int>();
  if (smooth.contains("delta_r")) sc.functional.nb.delta_r = smooth.at("delta_r").get<double>();
  if (smooth.contains("tau_override") && !smooth.at("tau_override").is_null())
    sc.functional.nb.tau_override = smooth.at("tau_override").get<double>();
  if (krig.contains("n_starts")) sc.kriging.n_starts = krig.at("n_starts").get<int>();
  if (krig.contains("budget")) sc.kriging.budget = krig.at("budget").get<int>();
  if (krig.contains("nugget") && !krig.at("nugget").is_null())
    sc.kriging.fix_nugget = krig.at("nugget").get<double>();
  if (sur.contains("variance_threshold")) {
    sc.functional.variance_threshold = sur.at("variance_threshold").get<double>();
    sc.pca_threshold = sc.functional.variance_threshold;
  }
  return sc;
}

InputDistribution distribution_from_json(const Json& arr, const std::vector<std::string>& expected) {
  if (!arr.is_array()) throw Error("cli", "distributions must be an array");
  InputDistribution d;
  for (const auto& e : arr) {
    d.names.push_back(e.at("name").get<std::string>());
    d.marginals.push_back(
        {parse_marginal_kind(e.at("kind").get<std::string>()), get_double(e, "a"), get_double(e, "b")});
  }
  if (!expected.empty() && d.names != expected) {
    std::string want;
    for (const auto& n : expected) want += (want.empty() ? "" : ", ") + n;
    throw Error("cli", "distribution names must be [" + want + "] in that order");
  }
  d.validate();
  return d;
}

// --------------------------------------------------------- generate ----

void cmd_generate(const Json& cfg, std::uint64_t seed, const fs::path& out) {
  const BenchSimulator sim = simulator_of(cfg);
  const int n = cfg.at("generate").at("n").get<int>();
  const double noise = cfg.at("generate").at("noise").get<double>();
  RandomSource rng = RandomSource(seed).derive("data");
  const ResponseEnsemble data = generate_dataset(sim, n, rng, noise);
  write_ensemble(out / "inputs.csv", out / "responses.csv", data);
  write_excitation(sim, out);
  std::printf("generated %d %s samples (noise %s) in %s\n", n, to_string(sim.model()).c_str(),
              format_number(noise).c_str(), out.string().c_str());
}

// -------------------------------------------------------------- fit ----

namespace {

Json fit_report(const LatentSurrogate& s) {
  Json r;
  r["reducer"] = to_string(s.kind());
  r["input_names"] = s.input_names();
  r["m"] = s.latent_dim();
  if (const auto* fr = std::get_if<FunctionalReducer>(&s.reducer())) {
    const auto& st = fr->state();
    r["basis"] = {{"kind", to_string(st.kind)}, {"n_b", st.n_b}, {"order", st.order}, {"mirror", st.mirror}};
    r["tau"] = st.tau;
    r["variance_fraction"] = fr->variance_fraction();
    r["eigenvalues"] = std::vector<double>(st.eigenvalues.data(), st.eigenvalues.data() + st.eigenvalues.size());
    Json trace = Json::array();
    for (const auto& round : fr->selection().trace) {
      Json t = {{"n_b", round.n_b}, {"tau", round.tau}, {"delta", round.delta}};
      t["rel_change"] = std::isnan(round.rel_change) ? Json(nullptr) : Json(round.rel_change);
      t["stop"] = round.stop;
      trace.push_back(t);
    }
    r["nb_search"] = trace;
  } else {
    const auto& pca = std::get<PcaReducer>(s.reducer());
    r["variance_fraction"] = pca.variance_fraction();
    const VectorXd& ev = pca.eigenvalues();
    r["eigenvalues"] = std::vector<double>(ev.data(), ev.data() + ev.size());
  }
  Json models = Json::array();
  for (const auto& m : s.models()) {
    const auto& h = m.hyper();
    models.push_back({{"theta", std::vector<double>(h.theta.data(), h.theta.data() + h.theta.size())},
                      {"sigma_z2", h.sigma_z2},
                      {"sigma_n2", h.sigma_n2},
                      {"mu", m.mu()},
                      {"log_likelihood", m.log_likelihood()}});
  }
  r["kriging"] = models;
  r["warnings"] = s.warnings();
  return r;
}

}  // namespace

void cmd_fit(const Json& cfg, std::uint64_t seed, const fs::path& out) {
  const ResponseEnsemble data =
      read_ensemble(resolve_path(cfg, "data", "inputs"), resolve_path(cfg, "data", "responses"));
  const ReducerKind kind = parse_reducer_kind(cfg.at("surrogate").at("reducer").get<std::string>());
  const auto start = std::chrono::steady_clock::now();
  RandomSource rng = RandomSource(seed).derive("fit");
  const LatentSurrogate s = LatentSurrogate::fit(data, surrogate_config(cfg, kind), rng);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  Json report = fit_report(s);
  report["n_train"] = data.size();
  report["seed"] = seed;
  s.save(out / "model.json");
  write_file_atomic(out / "report.json", report.dump(2) + "\n");
  for (const auto& w : s.warnings()) std::fprintf(stderr, "warning: %s\n", w.c_str());
  std::printf("fit %s: m = %d, %.2f s\n", to_string(kind).c_str(), s.latent_dim(), secs);
}

// ---------------------------------------------------------- predict ----

void cmd_predict(const Json& cfg, std::uint64_t, const fs::path& out) {
  const LatentSurrogate s = LatentSurrogate::load(resolve_path(cfg, "predict", "model_file"));
  const CsvTable in = read_inputs(resolve_path(cfg, "predict", "inputs"));
  if (in.values.cols() != s.input_dims())
    throw Error("cli", "inputs have " + std::to_string(in.values.cols()) + " columns, model expects " +
                           std::to_string(s.input_dims()));
  MatrixXd mean(in.values.rows(), s.grid().size());
  MatrixXd var(in.values.rows(), s.grid().size());
  for (Eigen::Index i = 0; i < in.values.rows(); ++i) {
    const auto p = s.predict_curve(in.values.row(i).transpose());
    mean.row(i) = p.mean.transpose();
    var.row(i) = p.variance.transpose();
  }
  write_csv(out / "predictions.csv", {{}, curve_table(s.grid(), mean)});
  write_csv(out / "variance.csv", {{}, curve_table(s.grid(), var)});
  std::printf("predicted %d curves\n", static_cast<int>(in.values.rows()));
}

// ------------------------------------------------------------ study ----

StudyMethod parse_study_method(const std::string& s) {
  constexpr std::string_view suffix = "-tau0";
  if (s.size() > suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0) {
    const ReducerKind k = parse_reducer_kind(s.substr(0, s.size() - suffix.size()));
    if (k == ReducerKind::Pca) throw Error("cli", "'-tau0' applies to kfdr-f and kfdr-b only");
    return {s, k, true};
  }
  return {s, parse_reducer_kind(s), false};
}

std::vector<StudyRow> run_study(const Json& cfg, std::uint64_t seed, Exec exec) {
  const BenchSimulator sim = simulator_of(cfg);
  const Json& st = cfg.at("study");
  const auto sizes = st.at("n_train").get<std::vector<int>>();
  const int reps = st.at("repetitions").get<int>();
  const int n_test = st.at("n_test").get<int>();
  const double noise = st.at("noise").get<double>();
  std::vector<StudyMethod> methods;
  for (const auto& m : st.at("methods")) methods.push_back(parse_study_method(m.get<std::string>()));
  if (sizes.empty() || reps < 1 || methods.empty()) throw Error("cli", "study needs sizes, repetitions and methods");

  const RandomSource master(seed);
  const RandomSource data_rng = master.derive("data");
  const RandomSource fit_rng = master.derive("fit");
  RandomSource test_rng = data_rng.derive("test");
  const ResponseEnsemble test = generate_dataset(sim, n_test, test_rng, 0.0, exec);

  std::vector<StudyRow> rows;
  for (int n : sizes) {
    for (int r = 0; r < reps; ++r) {
      const std::string tag = "train-" + std::to_string(n) + "-" + std::to_string(r);
      RandomSource train_rng = data_rng.derive(tag);
      const ResponseEnsemble train = generate_dataset(sim, n, train_rng, noise, exec);
      for (const auto& m : methods) {
        SurrogateConfig sc = surrogate_config(cfg, m.kind);
        if (m.tau_zero) sc.functional.nb.tau_override = 0.0;
        RandomSource rng = fit_rng.derive(tag);
        const LatentSurrogate s = LatentSurrogate::fit(train, sc, rng, exec);
        const double e = model_nrmse(test.responses, s.predict_mean_curves(test.inputs, exec));
        rows.push_back({m.label, n, r, e});
      }
    }
  }
  return rows;
}

void cmd_study(const Json& cfg, std::uint64_t seed, const fs::path& out) {
  const auto start = std::chrono::steady_clock::now();
  const auto rows = run_study(cfg, seed);
  std::string csv = "method,n_train,repetition,nrmse\n";
  for (const auto& r : rows)
    csv += r.method + "," + std::to_string(r.n_train) + "," + std::to_string(r.repetition) + "," +
           format_number(r.nrmse) + "\n";
  write_file_atomic(out / "study.csv", csv);
  write_config_copy(cfg, seed, out);
  std::printf("study: %zu fits, %.1f s\n", rows.size(),
              std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
}

// ---------------------------------------------------------- forward ----

void cmd_forward(const Json& cfg, std::uint64_t seed, const fs::path& out) {
  const Json& fw = cfg.at("forward");
  ForwardUqOptions opt;
  opt.n_mcs = fw.at("n_mcs").get<int>();
  opt.kde_points = fw.at("kde_points").get<int>();
  RandomSource rng = RandomSource(seed).derive("forward");
  ForwardUqResult r;
  const auto start = std::chrono::steady_clock::now();
  if (fw.at("exact").get<bool>()) {
    const BenchSimulator sim = simulator_of(cfg);
    const InputDistribution dist = distribution_from_json(fw.at("distributions"), sim.info().names);
    r = forward_uq([&sim](const VectorXd& x) { return sim(x); }, sim.info().grid, dist, opt, rng);
  } else {
    const LatentSurrogate s = LatentSurrogate::load(resolve_path(cfg, "forward", "model_file"));
    const InputDistribution dist = distribution_from_json(fw.at("distributions"), s.input_names());
    r = forward_uq(s, dist, opt, rng);
  }
  std::string ms = "t,mean,std\n";
  for (Eigen::Index j = 0; j < r.t.size(); ++j) ms += csv_row({r.t[j], r.mean[j], r.std[j]});
  std::string kde = "value,pdf_max,pdf_min\n";
  for (Eigen::Index j = 0; j < r.kde_values.size(); ++j)
    kde += csv_row({r.kde_values[j], r.pdf_max[j], r.pdf_min[j]});
  write_file_atomic(out / "mean_std.csv", ms);
  write_file_atomic(out / "extremes_kde.csv", kde);
  std::printf("forward UQ: n_mcs = %d, %.1f s\n", r.n_mcs,
              std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
}

// ---------------------------------------------------------- inverse ----

namespace {

struct InverseSetup {
  std::vector<std::string> names;  // full input names
  std::vector<int> free_index;     // positions calibrated
  VectorXd fixed_full;             // values of pinned inputs (others unused)
  std::vector<std::pair<double, double>> bounds;

  VectorXd expand(const VectorXd& x) const {
    VectorXd full = fixed_full;
    for (std::size_t i = 0; i < free_index.size(); ++i) full[free_index[i]] = x[static_cast<Eigen::Index>(i)];
    return full;
  }
};

InverseSetup inverse_setup(const Json& inv, const std::vector<std::string>& names,
                           const std::vector<std::pair<double, double>>& bounds) {
  InverseSetup s;
  s.names = names;
  s.fixed_full = VectorXd::Zero(static_cast<Eigen::Index>(names.size()));
  const Json& fixed = inv.at("fixed");
  for (const auto& [k, v] : fixed.items()) {
    auto it = std::find(names.begin(), names.end(), k);
    if (it == names.end()) throw Error("cli", "inverse.fixed names unknown input '" + k + "'");
  }
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (fixed.contains(names[i])) {
      s.fixed_full[static_cast<Eigen::Index>(i)] = fixed.at(names[i]).get<double>();
    } else {
      s.free_index.push_back(static_cast<int>(i));
      s.bounds.push_back(bounds[i]);
    }
  }
  if (s.free_index.empty()) throw Error("cli", "inverse UQ has no free parameters");
  return s;
}

MatrixXd read_observations(const fs::path& path, const TimeGrid& grid) {
  const CsvTable t = read_csv(path, true);
  if (t.values.cols() < 2) throw Error("cli", "observation file needs a time column and at least one observation");
  if (t.values.rows() != grid.size())
    throw Error("cli", "observation file has " + std::to_string(t.values.rows()) + " time nodes, model grid has " +
                           std::to_string(grid.size()));
  const TimeGrid g = grid_from_nodes(t.values.col(0));
  if (std::abs(g.t0() - grid.t0()) > 1e-9 * std::abs(grid.te() - grid.t0()) ||
      std::abs(g.te() - grid.te()) > 1e-9 * std::abs(grid.te() - grid.t0()))
    throw Error("cli", "observation time nodes do not match the model grid");
  return t.values.rightCols(t.values.cols() - 1).transpose();
}

}  // namespace

void cmd_inverse(const Json& cfg, std::uint64_t seed, const fs::path& out) {
  const Json& inv = cfg.at("inverse");
  const BenchSimulator sim = simulator_of(cfg);
  const RandomSource master(seed);

  std::optional<LatentSurrogate> surrogate;
  const bool exact = inv.at("exact").get<bool>();
  if (!exact) surrogate = LatentSurrogate::load(resolve_path(cfg, "inverse", "model_file"));
  const std::vector<std::string> names =
      surrogate && !surrogate->input_names().empty() ? surrogate->input_names() : sim.info().names;
  if (names.size() != sim.info().names.size())
    throw Error("cli", "model inputs do not match the " + to_string(sim.model()) + " benchmark");
  const TimeGrid grid = surrogate ? surrogate->grid() : sim.info().grid;
  const InverseSetup setup = inverse_setup(inv, names, sim.info().bounds);

  MatrixXd obs;
  if (inv.contains("observations") && !inv.at("observations").is_null()) {
    obs = read_observations(inv.at("observations").get<std::string>(), grid);
  } else {
    const int n_obs = inv.at("n_observations").get<int>();
    if (n_obs < 1) throw Error("cli", "inverse UQ needs at least one observation");
    const Json& truth = inv.at("truth");
    VectorXd x(static_cast<Eigen::Index>(names.size()));
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (!truth.contains(names[i])) throw Error("cli", "inverse.truth lacks '" + names[i] + "'");
      x[static_cast<Eigen::Index>(i)] = truth.at(names[i]).get<double>();
    }
    const VectorXd y = sim(x);
    obs = y.transpose().replicate(n_obs, 1);
    RandomSource noise = master.derive("observations");
    add_noise(obs, inv.at("noise").get<double>(), noise);
  }
  if (obs.rows() == 0) throw Error("cli", "inverse UQ needs at least one observation");

  CalibrationProblem problem;
  std::vector<std::string> free_names;
  for (int i : setup.free_index) free_names.push_back(names[static_cast<std::size_t>(i)]);
  if (inv.contains("prior") && !inv.at("prior").is_null()) {
    problem.prior = distribution_from_json(inv.at("prior"), free_names);
  } else {
    problem.prior.names = free_names;
    for (const auto& b : setup.bounds) problem.prior.marginals.push_back(Marginal::uniform(b.first, b.second));
  }
  const auto sp = inv.at("sigma_prior").get<std::vector<double>>();
  if (sp.size() != 2) throw Error("cli", "inverse.sigma_prior must be [lo, hi]");
  problem.sigma_lo = sp[0];
  problem.sigma_hi = sp[1];
  if (inv.contains("known_sigma") && !inv.at("known_sigma").is_null())
    problem.known_sigma = inv.at("known_sigma").get<double>();
  problem.observations = obs;
  if (surrogate) {
    const LatentSurrogate& s = *surrogate;
    problem.model = [&s, &setup](const VectorXd& x) { return s.reconstruct(s.latent_mean(setup.expand(x))); };
  } else {
    problem.model = [&sim, &setup](const VectorXd& x) { return sim(setup.expand(x)); };
  }
  problem.validate();

  McmcOptions mo;
  mo.walkers = inv.at("walkers").get<int>();
  mo.iterations = inv.at("iterations").get<int>();
  mo.burn_in = inv.at("burn_in").get<double>();
  RandomSource mcmc_rng = master.derive("mcmc");
  const auto start = std::chrono::steady_clock::now();
  const PosteriorSamples ps = ensemble_mcmc(
      [&problem](const VectorXd& th) { return problem(th); },
      [&problem](RandomSource& r) { return problem.sample_prior(r); }, problem.dims(), mo, mcmc_rng);
  const auto pnames = problem.parameter_names();
  const auto summary = posterior_summary(ps.draws, pnames);

  CsvTable obs_table;
  obs_table.header.push_back("t");
  for (Eigen::Index i = 0; i < obs.rows(); ++i) obs_table.header.push_back("obs" + std::to_string(i + 1));
  obs_table.values.resize(grid.size(), obs.rows() + 1);
  obs_table.values.col(0) = grid.nodes();
  obs_table.values.rightCols(obs.rows()) = obs.transpose();
  std::string sum_csv = "variable,mean,lower_2.5,upper_97.5\n";
  for (const auto& p : summary)
    sum_csv += p.name + "," + format_number(p.mean) + "," + format_number(p.lower) + "," +
               format_number(p.upper) + "\n";
  write_csv(out / "observations.csv", obs_table);
  write_csv(out / "posterior_draws.csv", {pnames, ps.draws});
  write_file_atomic(out / "posterior_summary.csv", sum_csv);
  std::printf("inverse UQ: %d walkers x %d iterations, acceptance rate %.3f, %.1f s\n", ps.walkers,
              ps.iterations, ps.acceptance_rate,
              std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  for (const auto& p : summary)
    std::printf("  %-8s mean %-12s 95%% [%s, %s]\n", p.name.c_str(), format_number(p.mean).c_str(),
                format_number(p.lower).c_str(), format_number(p.upper).c_str());
}

// -------------------------------------------------------------- run ----

int run(int argc, char** argv) {
  CLI::App app{"Kriging surrogates for time-variant responses via functional dimension reduction"};
  app.require_subcommand(1);

  struct Common {
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::string out = ".";
    std::string config;
    std::optional<std::string> model;
  };
  Common common;
  Json flags = Json::object();
  std::function<void(const Json&, std::uint64_t, const fs::path&)> action;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option_function<std::uint64_t>(
        "--seed", [&](const std::uint64_t& s) { common.seed = s; common.seed_set = true; }, "Master seed");
    sub->add_option("--out", common.out, "Output directory")->capture_default_str();
    sub->add_option("--config", common.config, "JSON config file")->check(CLI::ExistingFile);
    sub->add_option_function<std::string>(
        "--model", [&](const std::string& m) { common.model = m; }, "Benchmark: duffing | boucwen");
  };
  auto set_on = [&](CLI::App* sub, const std::string& flag, const char* section, const char* key,
                    const std::string& help) {
    sub->add_option_function<std::string>(
        flag,
        [&flags, section, key](const std::string& v) {
          Json parsed;
          try {
            parsed = Json::parse(v);
          } catch (...) {
            parsed = v;
          }
          flags[section][key] = parsed;
        },
        help);
  };

  auto* gen = app.add_subcommand("generate", "Simulate a benchmark dataset (inputs.csv, responses.csv)");
  add_common(gen);
  set_on(gen, "--n", "generate", "n", "Number of samples");
  set_on(gen, "--noise", "generate", "noise", "Output noise std");
  gen->callback([&] { action = cmd_generate; });

  auto* fit = app.add_subcommand("fit", "Fit a surrogate (model.json, report.json)");
  add_common(fit);
  set_on(fit, "--inputs", "data", "inputs", "Inputs CSV");
  set_on(fit, "--responses", "data", "responses", "Responses CSV");
  set_on(fit, "--reducer", "surrogate", "reducer", "kfdr-f | kfdr-b | pca");
  fit->callback([&] { action = cmd_fit; });

  auto* pred = app.add_subcommand("predict", "Predict mean and variance curves");
  add_common(pred);
  set_on(pred, "--model-file", "predict", "model_file", "Fitted model file");
  set_on(pred, "--inputs", "predict", "inputs", "Inputs CSV");
  pred->callback([&] { action = cmd_predict; });

  auto* study = app.add_subcommand("study", "Test error versus training size (study.csv)");
  add_common(study);
  set_on(study, "--repetitions", "study", "repetitions", "Repetitions per training size");
  set_on(study, "--n-test", "study", "n_test", "Test set size");
  set_on(study, "--noise", "study", "noise", "Training output noise std");
  study->callback([&] { action = cmd_study; });

  auto* fwd = app.add_subcommand("forward", "Monte Carlo forward UQ (mean_std.csv, extremes_kde.csv)");
  add_common(fwd);
  set_on(fwd, "--model-file", "forward", "model_file", "Fitted model file");
  set_on(fwd, "--n-mcs", "forward", "n_mcs", "Monte Carlo sample count");
  fwd->add_flag_callback("--exact", [&] { flags["forward"]["exact"] = true; }, "Use the simulator instead of a surrogate");
  fwd->callback([&] { action = cmd_forward; });

  auto* inv = app.add_subcommand("inverse", "Bayesian calibration (posterior_draws.csv, posterior_summary.csv)");
  add_common(inv);
  set_on(inv, "--model-file", "inverse", "model_file", "Fitted model file");
  set_on(inv, "--observations", "inverse", "observations", "Observation CSV (t, obs1, obs2, ...)");
  set_on(inv, "--iterations", "inverse", "iterations", "MCMC iterations");
  inv->add_flag_callback("--exact", [&] { flags["inverse"]["exact"] = true; }, "Use the simulator instead of a surrogate");
  inv->callback([&] { action = cmd_inverse; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    Json user = common.config.empty() ? Json::object() : read_json_file(common.config);
    Json cfg = resolve_config(user, common.model);
    cfg.merge_patch(flags);
    const std::uint64_t seed = common.seed_set ? common.seed : cfg.at("seed").get<std::uint64_t>();
    action(cfg, seed, fs::path(common.out));
    return 0;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
  } catch (const nlohmann::json::exception& e) {
    std::fprintf(stderr, "error: [cli] bad config value: %s\n", e.what());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
  }
  return 1;
}

}  // namespace kfdr::cli
