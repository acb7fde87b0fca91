#include "kfdr/io.hpp"

#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <system_error>

#include "kfdr/error.hpp"

namespace kfdr {

namespace fs = std::filesystem;

void write_file_atomic(const fs::path& path, const std::string& contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("io", "cannot write " + tmp.string());
    out << contents;
    out.flush();
    if (!out) throw Error("io", "write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error("io", "cannot move file into place: " + path.string());
  }
}

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    cells.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_cell(const std::string& s, const fs::path& path, std::size_t row) {
  // strtod rather than stod: subnormal values set ERANGE but are valid.
  char* end = nullptr;
  errno = 0;
  const double v = s.empty() ? 0.0 : std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || (errno == ERANGE && std::isinf(v)))
    throw Error("io", path.string() + ": line " + std::to_string(row + 1) + ": bad number '" + s + "'");
  return v;
}

}  // namespace

CsvTable read_csv(const fs::path& path, bool has_header) {
  std::ifstream in(path);
  if (!in) throw Error("io", "cannot open " + path.string());
  CsvTable table;
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  std::size_t width = 0;
  bool first = true;
  for (; std::getline(in, line); ++lineno) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto cells = split_line(line);
    if (first && has_header) {
      table.header = std::move(cells);
      width = table.header.size();
      first = false;
      continue;
    }
    if (width == 0) width = cells.size();
    if (cells.size() != width)
      throw Error("io", path.string() + ": line " + std::to_string(lineno + 1) + " has " +
                            std::to_string(cells.size()) + " fields, expected " + std::to_string(width));
    std::vector<double> row;
    row.reserve(cells.size());
    for (const auto& c : cells) row.push_back(parse_cell(c, path, lineno));
    rows.push_back(std::move(row));
    first = false;
  }
  table.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < width; ++j)
      table.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return table;
}

void write_csv(const fs::path& path, const CsvTable& table) {
  std::string out;
  if (!table.header.empty()) {
    for (std::size_t j = 0; j < table.header.size(); ++j) {
      if (j) out += ',';
      out += table.header[j];
    }
    out += '\n';
  }
  for (Eigen::Index i = 0; i < table.values.rows(); ++i) {
    for (Eigen::Index j = 0; j < table.values.cols(); ++j) {
      if (j) out += ',';
      out += format_number(table.values(i, j));
    }
    out += '\n';
  }
  write_file_atomic(path, out);
}

TimeGrid grid_from_nodes(const VectorXd& nodes) {
  const auto n = nodes.size();
  if (n < 2) throw Error("io", "time grid needs at least 2 nodes");
  const double t0 = nodes[0], te = nodes[n - 1];
  const TimeGrid g(t0, te, static_cast<int>(n));
  const double tol = 1e-9 * std::max(std::abs(te - t0), 1e-300) + 1e-6 * g.step();
  for (Eigen::Index j = 0; j < n; ++j)
    if (std::abs(nodes[j] - g.node(static_cast<int>(j))) > tol)
      throw Error("io", "time nodes are not uniformly spaced");
  return g;
}

void write_ensemble(const fs::path& inputs_path, const fs::path& responses_path,
                    const ResponseEnsemble& data) {
  data.validate();
  CsvTable in;
  in.header = data.input_names;
  if (in.header.empty())
    for (int j = 0; j < data.dims(); ++j) in.header.push_back("x" + std::to_string(j + 1));
  in.values = data.inputs;
  write_csv(inputs_path, in);

  CsvTable resp;
  resp.values.resize(data.size() + 1, data.grid.size());
  resp.values.row(0) = data.grid.nodes().transpose();
  resp.values.bottomRows(data.size()) = data.responses;
  write_csv(responses_path, resp);
}

CsvTable read_inputs(const fs::path& path) {
  CsvTable t = read_csv(path, true);
  if (t.values.rows() == 0) throw Error("io", path.string() + ": no input rows");
  return t;
}

ResponseEnsemble read_ensemble(const fs::path& inputs_path, const fs::path& responses_path) {
  const CsvTable in = read_inputs(inputs_path);
  const CsvTable resp = read_csv(responses_path, false);
  if (resp.values.rows() < 2) throw Error("io", responses_path.string() + ": no response rows");
  ResponseEnsemble data;
  data.grid = grid_from_nodes(resp.values.row(0).transpose());
  data.responses = resp.values.bottomRows(resp.values.rows() - 1);
  data.inputs = in.values;
  data.input_names = in.header;
  if (data.inputs.rows() != data.responses.rows())
    throw Error("io", "inputs and responses have different row counts (" +
                          std::to_string(data.inputs.rows()) + " vs " +
                          std::to_string(data.responses.rows()) + ")");
  data.validate();
  return data;
}

}  // namespace kfdr
