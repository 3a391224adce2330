#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "quadlab/regression.hpp"

namespace quadlab {

inline constexpr std::string_view kVersion = "0.1.0";

/// Rectangular table of reals with free-form metadata (config, seed, verdicts).
struct ReportTable {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  nlohmann::json metadata = nlohmann::json::object();

  void add_row(std::vector<double> row);
  std::size_t column_index(std::string_view column) const;  ///< throws std::out_of_range
  double at(std::size_t row, std::string_view column) const;
  /// Throws std::invalid_argument unless every row has one value per column.
  void validate() const;
};

enum class ReportFormat { csv, json };
ReportFormat parse_report_format(std::string_view s);

/// Shortest text that parses back to the same double (at most 17 significant digits).
std::string format_double(double v);

void write_csv(std::ostream& out, const ReportTable& table);
nlohmann::json to_json(const ReportTable& table);
ReportTable report_from_json(const nlohmann::json& j);

/// Writes CSV or JSON to an explicit path.
void emit_report(const ReportTable& table, const std::filesystem::path& path, ReportFormat format);

class CsvError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numeric CSV with one header row. Locale independent; blank lines are skipped.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::size_t column_index(std::string_view name) const;  ///< throws CsvError naming the column
};

CsvTable parse_csv(std::istream& in, const std::string& source = "<stream>");
CsvTable read_csv(const std::filesystem::path& path);

/// Reads a report written by emit_report(..., csv); metadata is not part of CSV.
ReportTable load_report_csv(const std::filesystem::path& path);

struct LabeledDataset {
  Dataset data;
  std::vector<std::string> features;
  std::string target;
};

/// Target column becomes the response; every other column is a regressor, in file order.
LabeledDataset load_csv(const std::filesystem::path& path, const std::string& target_column);
LabeledDataset dataset_from_csv(const CsvTable& table, const std::string& target_column);

void write_dataset_csv(std::ostream& out, const LabeledDataset& data);

}  // namespace quadlab
