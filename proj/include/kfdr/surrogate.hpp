#pragma once

#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "kfdr/fpca.hpp"
#include "kfdr/kriging.hpp"

namespace kfdr {

/// Euclidean PCA of the centered response vectors, the vector-space baseline.
class PcaReducer {
 public:
  static PcaReducer fit(const MatrixXd& responses, double threshold = 0.99);
  static PcaReducer restore(VectorXd mean_curve, MatrixXd components, VectorXd eigenvalues);

  int latent_dim() const noexcept { return static_cast<int>(components_.cols()); }
  const VectorXd& mean_curve() const noexcept { return mean_; }
  /// n_t x m, orthonormal columns.
  const MatrixXd& modes() const noexcept { return components_; }
  /// All eigenvalues of the sample covariance, descending.
  const VectorXd& eigenvalues() const noexcept { return eigenvalues_; }
  double variance_fraction() const;

  VectorXd project(const VectorXd& y) const;
  MatrixXd project_rows(const MatrixXd& Y) const;
  VectorXd reconstruct(const VectorXd& xi) const;

 private:
  VectorXd mean_;
  MatrixXd components_;
  VectorXd eigenvalues_;
};

enum class ReducerKind { KfdrFourier, KfdrBSpline, Pca };

std::string to_string(ReducerKind kind);
ReducerKind parse_reducer_kind(const std::string& s);

struct SurrogateConfig {
  ReducerKind reducer = ReducerKind::KfdrBSpline;
  /// Used by the functional variants; `kind` is set from `reducer`.
  ReducerOptions functional;
  KrigingOptions kriging;
  double pca_threshold = 0.99;

  /// Defaults per variant: Fourier mirrors the data and starts from 11
  /// functions, B-splines start from 8.
  static SurrogateConfig defaults(ReducerKind kind);
};

/// Reducer plus one Kriging model per latent score.
class LatentSurrogate {
 public:
  using Reducer = std::variant<FunctionalReducer, PcaReducer>;

  struct CurvePrediction {
    VectorXd mean;
    VectorXd variance;
  };

  static LatentSurrogate fit(const ResponseEnsemble& data, const SurrogateConfig& config,
                             RandomSource& rng, Exec exec = kDefaultExec);

  ReducerKind kind() const noexcept { return kind_; }
  const Reducer& reducer() const noexcept { return reducer_; }
  const TimeGrid& grid() const noexcept { return grid_; }
  int latent_dim() const noexcept { return static_cast<int>(models_.size()); }
  int input_dims() const noexcept { return scaling_.dims(); }
  const std::vector<KrigingModel>& models() const noexcept { return models_; }
  const InputScaling& scaling() const noexcept { return scaling_; }
  const std::vector<std::string>& input_names() const noexcept { return input_names_; }
  const std::vector<std::string>& warnings() const noexcept { return warnings_; }

  const VectorXd& mean_curve() const;
  /// n_t x m map from scores to centered curves on the grid.
  const MatrixXd& modes() const;
  VectorXd project(const VectorXd& y) const;
  MatrixXd project_rows(const MatrixXd& Y) const;
  VectorXd reconstruct(const VectorXd& xi) const;

  /// Kriging mean of every latent score at x.
  VectorXd latent_mean(const VectorXd& x) const;
  /// Row i holds latent_mean(X.row(i)).
  MatrixXd latent_means(const MatrixXd& X, Exec exec = kDefaultExec) const;

  /// Mean curve mean + modes mu_xi(x) and pointwise variance
  /// eta^T B diag(sigma_xi^2(x)) B^T eta.
  CurvePrediction predict_curve(const VectorXd& x) const;
  /// Row i holds the predicted mean curve at X.row(i).
  MatrixXd predict_mean_curves(const MatrixXd& X, Exec exec = kDefaultExec) const;

  nlohmann::ordered_json to_json() const;
  static LatentSurrogate from_json(const nlohmann::ordered_json& j);
  void save(const std::filesystem::path& path) const;
  static LatentSurrogate load(const std::filesystem::path& path);

 private:
  LatentSurrogate() = default;

  ReducerKind kind_ = ReducerKind::KfdrBSpline;
  Reducer reducer_ = PcaReducer{};
  TimeGrid grid_{0.0, 1.0, 2};
  InputScaling scaling_;
  std::vector<KrigingModel> models_;
  std::vector<std::string> input_names_;
  std::vector<std::string> warnings_;
};

/// Seeded fold assignment: a permutation of 0..n-1 cut into k contiguous
/// blocks (block f spans [f n / k, (f + 1) n / k)).
std::vector<std::vector<std::size_t>> fold_partition(std::size_t n, int k, RandomSource& rng);

/// Test error (mean per-curve RMS over range) of each of k folds, fitting on
/// the other k - 1. Throws when a training portion would have fewer than 2
/// samples.
std::vector<double> cross_validate(const ResponseEnsemble& data, int k,
                                   const SurrogateConfig& config, RandomSource& rng,
                                   Exec exec = kDefaultExec);

}  // namespace kfdr
