#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "kfdr/bench.hpp"
#include "kfdr/surrogate.hpp"
#include "kfdr/uq.hpp"

namespace kfdr::cli {

using Json = nlohmann::ordered_json;
namespace fs = std::filesystem;

/// Built-in settings for a benchmark; a user config is merged on top.
Json default_config(BenchModel model);

/// Defaults for the model named by `model_flag`, else by user["model"], else
/// duffing, with `user` merged over them (RFC 7386 merge patch).
Json resolve_config(const Json& user, const std::optional<std::string>& model_flag);

Json read_json_file(const fs::path& path);

/// basis.*, smoothing.*, kriging.* and surrogate.* for one reducer.
SurrogateConfig surrogate_config(const Json& cfg, ReducerKind kind);

/// Array of {name, kind, a, b}; names must match `expected` in order when
/// `expected` is non-empty.
InputDistribution distribution_from_json(const Json& arr, const std::vector<std::string>& expected);

struct StudyMethod {
  std::string label;  // as written in the CSV
  ReducerKind kind;
  bool tau_zero = false;
};

/// "kfdr-f", "kfdr-b", "pca", or a functional variant with "-tau0" appended
/// (smoothing parameter pinned to 0).
StudyMethod parse_study_method(const std::string& s);

struct StudyRow {
  std::string method;
  int n_train = 0;
  int repetition = 0;
  double nrmse = 0.0;
};

/// Error-versus-training-size study. Per (n_train, repetition) one training
/// set and one fit seed are drawn and shared by every method; the clean test
/// set is fixed for the whole study.
std::vector<StudyRow> run_study(const Json& cfg, std::uint64_t seed, Exec exec = kDefaultExec);

void cmd_generate(const Json& cfg, std::uint64_t seed, const fs::path& out);
void cmd_fit(const Json& cfg, std::uint64_t seed, const fs::path& out);
void cmd_predict(const Json& cfg, std::uint64_t seed, const fs::path& out);
void cmd_study(const Json& cfg, std::uint64_t seed, const fs::path& out);
void cmd_forward(const Json& cfg, std::uint64_t seed, const fs::path& out);
void cmd_inverse(const Json& cfg, std::uint64_t seed, const fs::path& out);

/// Entry point of the `kfdr` executable.
int run(int argc, char** argv);

}  // namespace kfdr::cli
