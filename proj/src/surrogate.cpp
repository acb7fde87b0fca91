#include "kfdr/surrogate.hpp"

#include <fstream>
#include <sstream>

#include "kfdr/error.hpp"
#include "kfdr/io.hpp"

namespace kfdr {

using nlohmann::ordered_json;

// ---------------------------------------------------------------- PCA ----

PcaReducer PcaReducer::fit(const MatrixXd& responses, double threshold) {
  if (responses.rows() < 2) throw Error("surrogate", "PCA needs at least 2 curves");
  const CenteredData cd = center_ensemble(responses);
  PcaReducer r;
  r.mean_ = cd.mean_curve;
  Eigen::BDCSVD<MatrixXd> svd(cd.centered, Eigen::ComputeThinV);
  const double scale = 1.0 / static_cast<double>(responses.rows() - 1);
  VectorXd lambda = VectorXd::Zero(responses.cols());
  const VectorXd& s = svd.singularValues();
  lambda.head(s.size()) = scale * s.array().square().matrix();
  const double floor_amp = 1e-12 * responses.cwiseAbs().maxCoeff();
  const double floor = floor_amp * floor_amp * static_cast<double>(responses.cols());
  for (Eigen::Index k = 0; k < lambda.size(); ++k)
    if (lambda[k] <= floor) lambda[k] = 0.0;
  r.eigenvalues_ = lambda;
  const int m = select_m(lambda, threshold);
  MatrixXd V = svd.matrixV().leftCols(m);
  for (int k = 0; k < m; ++k) {
    Eigen::Index arg = 0;
    V.col(k).cwiseAbs().maxCoeff(&arg);
    if (V(arg, k) < 0.0) V.col(k) *= -1.0;
  }
  r.components_ = V;
  return r;
}

PcaReducer PcaReducer::restore(VectorXd mean_curve, MatrixXd components, VectorXd eigenvalues) {
  if (components.rows() != mean_curve.size())
    throw Error("surrogate", "PCA components do not match mean curve length");
  PcaReducer r;
  r.mean_ = std::move(mean_curve);
  r.components_ = std::move(components);
  r.eigenvalues_ = std::move(eigenvalues);
  return r;
}

double PcaReducer::variance_fraction() const {
  const double total = eigenvalues_.sum();
  return total > 0.0 ? eigenvalues_.head(latent_dim()).sum() / total : 1.0;
}

VectorXd PcaReducer::project(const VectorXd& y) const {
  if (y.size() != mean_.size()) throw Error("surrogate", "project: curve length mismatch");
  return components_.transpose() * (y - mean_);
}

MatrixXd PcaReducer::project_rows(const MatrixXd& Y) const {
  if (Y.cols() != mean_.size()) throw Error("surrogate", "project: curve length mismatch");
  return (Y.rowwise() - mean_.transpose()) * components_;
}

VectorXd PcaReducer::reconstruct(const VectorXd& xi) const {
  if (xi.size() != latent_dim()) throw Error("surrogate", "reconstruct: score length mismatch");
  return mean_ + components_ * xi;
}

// ----------------------------------------------------------- config ----

std::string to_string(ReducerKind kind) {
  switch (kind) {
    case ReducerKind::KfdrFourier: return "kfdr-f";
    case ReducerKind::KfdrBSpline: return "kfdr-b";
    case ReducerKind::Pca: return "pca";
  }
  return "?";
}

ReducerKind parse_reducer_kind(const std::string& s) {
  if (s == "kfdr-f") return ReducerKind::KfdrFourier;
  if (s == "kfdr-b") return ReducerKind::KfdrBSpline;
  if (s == "pca") return ReducerKind::Pca;
  throw Error("surrogate", "unknown reducer '" + s + "' (expected kfdr-f, kfdr-b or pca)");
}

SurrogateConfig SurrogateConfig::defaults(ReducerKind kind) {
  SurrogateConfig c;
  c.reducer = kind;
  if (kind == ReducerKind::KfdrFourier) {
    c.functional.kind = BasisKind::Fourier;
    c.functional.mirror = true;
    c.functional.nb.n_b0 = 11;
  } else {
    c.functional.kind = BasisKind::BSpline;
    c.functional.mirror = false;
    c.functional.nb.n_b0 = 8;
  }
  return c;
}

// -------------------------------------------------------- surrogate ----

LatentSurrogate LatentSurrogate::fit(const ResponseEnsemble& data, const SurrogateConfig& config,
                                     RandomSource& rng, Exec exec) {
  data.validate();
  LatentSurrogate s;
  s.kind_ = config.reducer;
  s.grid_ = data.grid;
  s.input_names_ = data.input_names;
  s.scaling_ = InputScaling::from_data(data.inputs);
  if (data.size() < 2 * data.dims())
    s.warnings_.push_back("training size " + std::to_string(data.size()) +
                          " is below twice the input dimension");

  MatrixXd scores;
  if (config.reducer == ReducerKind::Pca) {
    PcaReducer pca = PcaReducer::fit(data.responses, config.pca_threshold);
    scores = pca.project_rows(data.responses);
    s.reducer_ = std::move(pca);
  } else {
    ReducerOptions opt = config.functional;
    opt.kind = config.reducer == ReducerKind::KfdrFourier ? BasisKind::Fourier : BasisKind::BSpline;
    FunctionalReducer fr = FunctionalReducer::fit(data.responses, data.grid, opt, exec);
    scores = fr.training_scores();
    s.reducer_ = std::move(fr);
  }

  const auto m = static_cast<std::size_t>(scores.cols());
  std::vector<std::optional<KrigingModel>> fitted(m);
  const RandomSource base = rng.derive("kriging");
  for_each_index(exec, m, [&](std::size_t j) {
    RandomSource local = base.derive("score-" + std::to_string(j));
    fitted[j] = KrigingModel::fit(data.inputs, scores.col(static_cast<Eigen::Index>(j)), s.scaling_,
                                  config.kriging, local, exec);
  });
  s.models_.reserve(m);
  for (auto& f : fitted) s.models_.push_back(std::move(*f));
  return s;
}

const VectorXd& LatentSurrogate::mean_curve() const {
  return std::visit([](const auto& r) -> const VectorXd& { return r.mean_curve(); }, reducer_);
}

const MatrixXd& LatentSurrogate::modes() const {
  return std::visit([](const auto& r) -> const MatrixXd& { return r.modes(); }, reducer_);
}

VectorXd LatentSurrogate::project(const VectorXd& y) const {
  return std::visit([&](const auto& r) { return r.project(y); }, reducer_);
}

MatrixXd LatentSurrogate::project_rows(const MatrixXd& Y) const {
  return std::visit([&](const auto& r) { return r.project_rows(Y); }, reducer_);
}

VectorXd LatentSurrogate::reconstruct(const VectorXd& xi) const {
  return std::visit([&](const auto& r) { return r.reconstruct(xi); }, reducer_);
}

VectorXd LatentSurrogate::latent_mean(const VectorXd& x) const {
  if (x.size() != input_dims()) throw Error("surrogate", "input dimension mismatch");
  VectorXd xi(latent_dim());
  for (int j = 0; j < latent_dim(); ++j) xi[j] = models_[static_cast<std::size_t>(j)].predict_mean(x);
  return xi;
}

MatrixXd LatentSurrogate::latent_means(const MatrixXd& X, Exec exec) const {
  if (X.cols() != input_dims()) throw Error("surrogate", "input dimension mismatch");
  MatrixXd out(X.rows(), latent_dim());
  for_each_index(exec, static_cast<std::size_t>(X.rows()), [&](std::size_t i) {
    const VectorXd x = X.row(static_cast<Eigen::Index>(i)).transpose();
    for (int j = 0; j < latent_dim(); ++j)
      out(static_cast<Eigen::Index>(i), j) = models_[static_cast<std::size_t>(j)].predict_mean(x);
  });
  return out;
}

LatentSurrogate::CurvePrediction LatentSurrogate::predict_curve(const VectorXd& x) const {
  if (x.size() != input_dims()) throw Error("surrogate", "input dimension mismatch");
  VectorXd mu(latent_dim());
  VectorXd var(latent_dim());
  for (int j = 0; j < latent_dim(); ++j) {
    const auto p = models_[static_cast<std::size_t>(j)].predict(x);
    mu[j] = p.mean;
    var[j] = p.variance;
  }
  const MatrixXd& phi = modes();
  return {mean_curve() + phi * mu, phi.array().square().matrix() * var};
}

MatrixXd LatentSurrogate::predict_mean_curves(const MatrixXd& X, Exec exec) const {
  const MatrixXd xi = latent_means(X, exec);
  return (xi * modes().transpose()).rowwise() + mean_curve().transpose();
}

// ---------------------------------------------------- serialization ----

namespace {

constexpr int kFormatVersion = 1;

ordered_json vec_json(const VectorXd& v) {
  ordered_json a = ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

VectorXd json_vec(const ordered_json& a) {
  VectorXd v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
  return v;
}

// Row-major nested arrays.
ordered_json mat_json(const MatrixXd& M) {
  ordered_json j;
  j["rows"] = M.rows();
  j["cols"] = M.cols();
  ordered_json data = ordered_json::array();
  for (Eigen::Index r = 0; r < M.rows(); ++r)
    for (Eigen::Index c = 0; c < M.cols(); ++c) data.push_back(M(r, c));
  j["data"] = std::move(data);
  return j;
}

MatrixXd json_mat(const ordered_json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto& data = j.at("data");
  if (data.size() != static_cast<std::size_t>(rows * cols))
    throw Error("surrogate", "model file: matrix data size mismatch");
  MatrixXd M(rows, cols);
  std::size_t k = 0;
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) M(r, c) = data[k++].get<double>();
  return M;
}

}  // namespace

ordered_json LatentSurrogate::to_json() const {
  ordered_json j;
  j["format"] = "kfdr-surrogate";
  j["version"] = kFormatVersion;
  j["reducer"] = to_string(kind_);
  j["grid"] = {{"t0", grid_.t0()}, {"te", grid_.te()}, {"n", grid_.size()}};
  j["input_names"] = input_names_;
  if (const auto* fr = std::get_if<FunctionalReducer>(&reducer_)) {
    const auto& st = fr->state();
    ordered_json r;
    r["basis"] = {{"kind", to_string(st.kind)}, {"n_b", st.n_b}, {"order", st.order},
                  {"mirror", st.mirror}};
    r["tau"] = st.tau;
    r["mean_curve"] = vec_json(st.mean_curve);
    r["eigenvalues"] = vec_json(st.eigenvalues);
    r["B"] = mat_json(st.B);
    j["functional"] = std::move(r);
  } else {
    const auto& pca = std::get<PcaReducer>(reducer_);
    ordered_json r;
    r["mean_curve"] = vec_json(pca.mean_curve());
    r["eigenvalues"] = vec_json(pca.eigenvalues());
    r["components"] = mat_json(pca.modes());
    j["pca"] = std::move(r);
  }
  j["scaling"] = {{"lower", vec_json(scaling_.lower)}, {"range", vec_json(scaling_.range)}};
  j["inputs_normalized"] =
      models_.empty() ? mat_json(MatrixXd(0, scaling_.dims())) : mat_json(models_.front().state().X_norm);
  ordered_json models = ordered_json::array();
  for (const auto& m : models_) {
    const auto& st = m.state();
    ordered_json mj;
    mj["theta"] = vec_json(st.hyper.theta);
    mj["sigma_z2"] = st.hyper.sigma_z2;
    mj["sigma_n2"] = st.hyper.sigma_n2;
    mj["y_offset"] = st.y_offset;
    mj["y_scale"] = st.y_scale;
    mj["y_std"] = vec_json(st.y_std);
    models.push_back(std::move(mj));
  }
  j["kriging"] = std::move(models);
  return j;
}

LatentSurrogate LatentSurrogate::from_json(const ordered_json& j) {
  try {
    if (j.at("format").get<std::string>() != "kfdr-surrogate")
      throw Error("surrogate", "not a surrogate model file");
    if (j.at("version").get<int>() != kFormatVersion)
      throw Error("surrogate", "unsupported model file version");
    LatentSurrogate s;
    s.kind_ = parse_reducer_kind(j.at("reducer").get<std::string>());
    const auto& g = j.at("grid");
    s.grid_ = TimeGrid(g.at("t0").get<double>(), g.at("te").get<double>(), g.at("n").get<int>());
    s.input_names_ = j.at("input_names").get<std::vector<std::string>>();
    if (s.kind_ == ReducerKind::Pca) {
      const auto& r = j.at("pca");
      s.reducer_ = PcaReducer::restore(json_vec(r.at("mean_curve")), json_mat(r.at("components")),
                                       json_vec(r.at("eigenvalues")));
    } else {
      const auto& r = j.at("functional");
      FunctionalReducer::State st;
      st.grid = s.grid_;
      const auto& b = r.at("basis");
      st.kind = parse_basis_kind(b.at("kind").get<std::string>());
      st.n_b = b.at("n_b").get<int>();
      st.order = b.at("order").get<int>();
      st.mirror = b.at("mirror").get<bool>();
      st.tau = r.at("tau").get<double>();
      st.mean_curve = json_vec(r.at("mean_curve"));
      st.eigenvalues = json_vec(r.at("eigenvalues"));
      st.B = json_mat(r.at("B"));
      s.reducer_ = FunctionalReducer::restore(st);
    }
    s.scaling_.lower = json_vec(j.at("scaling").at("lower"));
    s.scaling_.range = json_vec(j.at("scaling").at("range"));
    const MatrixXd X_norm = json_mat(j.at("inputs_normalized"));
    for (const auto& mj : j.at("kriging")) {
      KrigingModel::State st;
      st.scaling = s.scaling_;
      st.X_norm = X_norm;
      st.hyper.theta = json_vec(mj.at("theta"));
      st.hyper.sigma_z2 = mj.at("sigma_z2").get<double>();
      st.hyper.sigma_n2 = mj.at("sigma_n2").get<double>();
      st.y_offset = mj.at("y_offset").get<double>();
      st.y_scale = mj.at("y_scale").get<double>();
      st.y_std = json_vec(mj.at("y_std"));
      s.models_.push_back(KrigingModel::restore(st));
    }
    const int m = std::visit([](const auto& r) { return r.latent_dim(); }, s.reducer_);
    if (m != s.latent_dim()) throw Error("surrogate", "model count does not match latent dimension");
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error("surrogate", std::string("malformed model file: ") + e.what());
  }
}

void LatentSurrogate::save(const std::filesystem::path& path) const {
  write_file_atomic(path, to_json().dump(1) + "\n");
}

LatentSurrogate LatentSurrogate::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("surrogate", "cannot open model file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return from_json(ordered_json::parse(ss.str()));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error("surrogate", std::string("cannot parse model file: ") + e.what());
  }
}

// ------------------------------------------------- cross-validation ----

std::vector<std::vector<std::size_t>> fold_partition(std::size_t n, int k, RandomSource& rng) {
  if (k < 2) throw Error("surrogate", "cross-validation needs at least 2 folds");
  if (n < static_cast<std::size_t>(k)) throw Error("surrogate", "more folds than samples");
  const auto perm = rng.permutation(n);
  std::vector<std::vector<std::size_t>> folds(static_cast<std::size_t>(k));
  for (int f = 0; f < k; ++f) {
    const std::size_t lo = static_cast<std::size_t>(f) * n / static_cast<std::size_t>(k);
    const std::size_t hi = static_cast<std::size_t>(f + 1) * n / static_cast<std::size_t>(k);
    folds[static_cast<std::size_t>(f)].assign(perm.begin() + static_cast<std::ptrdiff_t>(lo),
                                              perm.begin() + static_cast<std::ptrdiff_t>(hi));
  }
  return folds;
}

std::vector<double> cross_validate(const ResponseEnsemble& data, int k,
                                   const SurrogateConfig& config, RandomSource& rng, Exec exec) {
  data.validate();
  RandomSource fold_rng = rng.derive("folds");
  const auto folds = fold_partition(static_cast<std::size_t>(data.size()), k, fold_rng);
  std::vector<double> errors;
  errors.reserve(folds.size());
  for (std::size_t f = 0; f < folds.size(); ++f) {
    std::vector<std::size_t> train;
    for (std::size_t g = 0; g < folds.size(); ++g)
      if (g != f) train.insert(train.end(), folds[g].begin(), folds[g].end());
    if (train.size() < 2) throw Error("surrogate", "cross-validation training portion below 2 samples");
    const ResponseEnsemble tr = data.subset(train);
    const ResponseEnsemble te = data.subset(folds[f]);
    RandomSource fit_rng = rng.derive("fold-" + std::to_string(f));
    const LatentSurrogate s = LatentSurrogate::fit(tr, config, fit_rng, exec);
    errors.push_back(model_nrmse(te.responses, s.predict_mean_curves(te.inputs, exec)));
  }
  return errors;
}

}  // namespace kfdr
