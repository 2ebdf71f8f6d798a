#pragma once

// Time series logged by the online, offline and Burgers runs, and its CSV form.

#include <cmath>
#include <cstddef>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "adjoint_flow/errors.hpp"
#include "adjoint_flow/io.hpp"
#include "adjoint_flow/mesh.hpp"

namespace adjoint_flow {

struct TraceRow {
  double t = 0.0;
  double J = 0.0;
  double grad_norm = 0.0;
  std::vector<double> theta;
  double theta_err = 0.0;
  double phi_norm = 0.0;
  double psi_norm = 0.0;
  double alpha = 0.0;
  double sup_norm = 0.0;
  double cum_inner_iters = 0.0;
};

struct TraceRecord {
  std::vector<TraceRow> rows;
  std::size_t theta_dim = 0;
  bool has_inner_iters = false;
  /// Set when a run stopped early on divergence.
  bool truncated = false;

  bool empty() const noexcept { return rows.empty(); }

  std::vector<std::string> column_names() const {
    std::vector<std::string> names{"t", "J", "grad_norm"};
    for (std::size_t k = 0; k < theta_dim; ++k) names.push_back("theta_" + std::to_string(k));
    for (const char* n : {"theta_err", "phi_norm", "psi_norm", "alpha", "sup_norm"}) names.emplace_back(n);
    if (has_inner_iters) names.emplace_back("cum_inner_iters");
    return names;
  }

  std::vector<double> column(const std::string& name) const {
    std::vector<double> out;
    out.reserve(rows.size());
    for (const TraceRow& r : rows) out.push_back(value(r, name));
    return out;
  }

  double value(const TraceRow& r, const std::string& name) const {
    if (name == "t") return r.t;
    if (name == "J") return r.J;
    if (name == "grad_norm") return r.grad_norm;
    if (name == "theta_err") return r.theta_err;
    if (name == "phi_norm") return r.phi_norm;
    if (name == "psi_norm") return r.psi_norm;
    if (name == "alpha") return r.alpha;
    if (name == "sup_norm") return r.sup_norm;
    if (name == "cum_inner_iters" && has_inner_iters) return r.cum_inner_iters;
    if (name.rfind("theta_", 0) == 0) {
      const std::size_t k = std::stoul(name.substr(6));
      if (k < r.theta.size()) return r.theta[k];
    }
    throw Error("trace has no column '" + name + "'");
  }
};

inline std::string trace_to_csv(const TraceRecord& trace) {
  const std::vector<std::string> names = trace.column_names();
  std::string out;
  for (std::size_t k = 0; k < names.size(); ++k) {
    if (k) out += ',';
    out += names[k];
  }
  out += '\n';
  for (const TraceRow& r : trace.rows) {
    for (std::size_t k = 0; k < names.size(); ++k) {
      if (k) out += ',';
      out += format_number(trace.value(r, names[k]));
    }
    out += '\n';
  }
  return out;
}

inline void write_trace_csv(const TraceRecord& trace, const std::string& path) {
  write_file_atomic(path, trace_to_csv(trace));
}

/// Column-oriented view of any CSV with a header row.
struct CsvTable {
  std::vector<std::string> header;
  std::map<std::string, std::vector<double>> columns;

  const std::vector<double>& column(const std::string& name) const {
    const auto it = columns.find(name);
    if (it == columns.end()) throw Error("CSV has no column '" + name + "'");
    return it->second;
  }
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

inline CsvTable parse_csv_table(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  CsvTable table;
  if (!std::getline(in, line) || line.empty()) throw Error("CSV has no header row");
  table.header = split_csv_line(line);
  for (const std::string& h : table.header) table.columns[h];
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const std::vector<std::string> cells = split_csv_line(line);
    if (cells.size() != table.header.size())
      throw Error("CSV row " + std::to_string(row) + " has " + std::to_string(cells.size()) + " cells");
    for (std::size_t k = 0; k < cells.size(); ++k) table.columns[table.header[k]].push_back(std::stod(cells[k]));
  }
  return table;
}

/// Divergence with the rows logged before the failure.
class DivergedRun : public DivergenceError {
 public:
  DivergedRun(const DivergenceError& cause, TraceRecord partial)
      : DivergenceError(cause), partial_(std::move(partial)) {
    partial_.truncated = true;
  }
  const TraceRecord& partial() const noexcept { return partial_; }

 private:
  TraceRecord partial_;
};

}  // namespace adjoint_flow
