#include "quadlab/report.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace quadlab {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string unquote(std::string_view s) {
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return std::string(s);
}

bool parse_number(std::string_view s, double& v) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return false;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace

void ReportTable::add_row(std::vector<double> row) {
  if (row.size() != columns.size())
    throw std::invalid_argument("ReportTable " + name + ": row has " + std::to_string(row.size()) +
                                " values for " + std::to_string(columns.size()) + " columns");
  rows.push_back(std::move(row));
}

std::size_t ReportTable::column_index(std::string_view column) const {
  for (std::size_t j = 0; j < columns.size(); ++j)
    if (columns[j] == column) return j;
  throw std::out_of_range("ReportTable " + name + ": no column '" + std::string(column) + "'");
}

double ReportTable::at(std::size_t row, std::string_view column) const {
  return rows.at(row).at(column_index(column));
}

void ReportTable::validate() const {
  for (std::size_t i = 0; i < rows.size(); ++i)
    if (rows[i].size() != columns.size())
      throw std::invalid_argument("ReportTable " + name + ": ragged row " + std::to_string(i));
}

ReportFormat parse_report_format(std::string_view s) {
  if (s == "csv") return ReportFormat::csv;
  if (s == "json") return ReportFormat::json;
  throw std::invalid_argument("unknown format '" + std::string(s) + "' (expected csv or json)");
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw std::runtime_error("format_double: conversion failed");
  return std::string(buf, ptr);
}

void write_csv(std::ostream& out, const ReportTable& table) {
  table.validate();
  for (std::size_t j = 0; j < table.columns.size(); ++j) out << (j ? "," : "") << table.columns[j];
  out << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t j = 0; j < row.size(); ++j) out << (j ? "," : "") << format_double(row[j]);
    out << '\n';
  }
}

nlohmann::json to_json(const ReportTable& table) {
  table.validate();
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : table.rows) {
    nlohmann::json r = nlohmann::json::array();
    for (double v : row) {
      // JSON has no inf/nan; keep them as strings so nothing is silently lost
      if (std::isfinite(v)) r.push_back(v);
      else r.push_back(format_double(v));
    }
    rows.push_back(std::move(r));
  }
  return {{"name", table.name}, {"columns", table.columns}, {"rows", std::move(rows)}, {"metadata", table.metadata}};
}

ReportTable report_from_json(const nlohmann::json& j) {
  ReportTable t;
  t.name = j.value("name", "");
  t.columns = j.at("columns").get<std::vector<std::string>>();
  for (const auto& r : j.at("rows")) {
    std::vector<double> row;
    for (const auto& v : r) {
      if (v.is_number()) {
        row.push_back(v.get<double>());
      } else {
        double parsed = 0.0;
        if (!v.is_string() || !parse_number(v.get<std::string>(), parsed))
          throw std::invalid_argument("report_from_json: non-numeric cell");
        row.push_back(parsed);
      }
    }
    t.add_row(std::move(row));
  }
  if (j.contains("metadata")) t.metadata = j.at("metadata");
  return t;
}

void emit_report(const ReportTable& table, const std::filesystem::path& path, ReportFormat format) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  if (format == ReportFormat::csv) {
    write_csv(out, table);
  } else {
    // dump() prints doubles with round-trip precision
    out << to_json(table).dump(2) << '\n';
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::size_t CsvTable::column_index(std::string_view name) const {
  for (std::size_t j = 0; j < header.size(); ++j)
    if (header[j] == name) return j;
  throw CsvError("column '" + std::string(name) + "' not found in CSV header");
}

CsvTable parse_csv(std::istream& in, const std::string& source) {
  CsvTable t;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split(line);
    if (!have_header) {
      for (auto c : cells) t.header.push_back(unquote(c));
      have_header = true;
      continue;
    }
    if (cells.size() != t.header.size())
      throw CsvError(source + ":" + std::to_string(line_no) + ": expected " + std::to_string(t.header.size()) +
                     " cells, found " + std::to_string(cells.size()));
    std::vector<double> row(cells.size());
    for (std::size_t j = 0; j < cells.size(); ++j)
      if (!parse_number(cells[j], row[j]))
        throw CsvError(source + ":" + std::to_string(line_no) + ": column '" + t.header[j] +
                       "' (col " + std::to_string(j + 1) + "): non-numeric value '" + std::string(cells[j]) + "'");
    t.rows.push_back(std::move(row));
  }
  if (!have_header) throw CsvError(source + ": empty file, header row required");
  return t;
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CsvError("cannot open " + path.string());
  return parse_csv(in, path.string());
}

ReportTable load_report_csv(const std::filesystem::path& path) {
  CsvTable csv = read_csv(path);
  ReportTable t;
  t.name = path.stem().string();
  t.columns = std::move(csv.header);
  t.rows = std::move(csv.rows);
  return t;
}

LabeledDataset dataset_from_csv(const CsvTable& table, const std::string& target_column) {
  const std::size_t target = table.column_index(target_column);
  if (table.rows.empty()) throw CsvError("CSV has a header but no data rows");
  LabeledDataset out;
  out.target = target_column;
  const auto n = static_cast<Eigen::Index>(table.rows.size());
  const auto d = static_cast<Eigen::Index>(table.header.size() - 1);
  out.data.design.resize(n, d);
  out.data.response.resize(n);
  for (std::size_t j = 0; j < table.header.size(); ++j)
    if (j != target) out.features.push_back(table.header[j]);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index col = 0;
    for (std::size_t j = 0; j < table.header.size(); ++j) {
      if (j == target) out.data.response(i) = table.rows[i][j];
      else out.data.design(i, col++) = table.rows[i][j];
    }
  }
  out.data.validate();
  return out;
}

LabeledDataset load_csv(const std::filesystem::path& path, const std::string& target_column) {
  return dataset_from_csv(read_csv(path), target_column);
}

void write_dataset_csv(std::ostream& out, const LabeledDataset& d) {
  for (const auto& f : d.features) out << f << ',';
  out << d.target << '\n';
  for (Eigen::Index i = 0; i < d.data.n(); ++i) {
    for (Eigen::Index j = 0; j < d.data.d(); ++j) out << format_double(d.data.design(i, j)) << ',';
    out << format_double(d.data.response(i)) << '\n';
  }
}

}  // namespace quadlab
