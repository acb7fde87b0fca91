#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "kfdr/core.hpp"

namespace kfdr {

/// Write to a sibling temporary file, then rename over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

/// "%.10g"
std::string format_number(double v);

/// Plain numeric table with an optional header row.
struct CsvTable {
  std::vector<std::string> header;
  MatrixXd values;
};

CsvTable read_csv(const std::filesystem::path& path, bool has_header);
void write_csv(const std::filesystem::path& path, const CsvTable& table);

/// Responses file: first row is the time nodes, then one curve per row.
/// Inputs file: header of input names, then one sample per row.
void write_ensemble(const std::filesystem::path& inputs_path,
                    const std::filesystem::path& responses_path, const ResponseEnsemble& data);
ResponseEnsemble read_ensemble(const std::filesystem::path& inputs_path,
                               const std::filesystem::path& responses_path);

/// Inputs file only (for prediction).
CsvTable read_inputs(const std::filesystem::path& path);

/// Grid recovered from a row of uniformly spaced nodes. Throws if the spacing
/// is not uniform to 1e-9 relative.
TimeGrid grid_from_nodes(const VectorXd& nodes);

}  // namespace kfdr
