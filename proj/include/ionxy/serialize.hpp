#pragma once

#include "ionxy/coupling.hpp"
#include "ionxy/evolution.hpp"
#include "ionxy/fit.hpp"
#include "ionxy/floquet.hpp"
#include "ionxy/magnus.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace ionxy {

using json = nlohmann::ordered_json;

json to_json(const TrapConfig& trap);
json to_json(const ModeSet& modes);
json to_json(const CouplingMatrix& c);
json to_json(const ValidityReport& r);
json to_json(const PowerLawDesign& d);
json to_json(const ModeSpectrumReport& r);
json to_json(const MagnusDiagnostics& d);   // summary, not the full time series
json to_json(const OscillationFit& f);
json to_json(const BaselineResult& b);

struct CsvColumn {
  std::string name;
  std::string unit;
  std::string description;
};

/// Numeric table; every cell is written with round-trip precision.
struct CsvTable {
  std::vector<CsvColumn> columns;
  std::vector<std::vector<double>> rows;
  std::string description;

  void add_row(std::vector<double> row);
};

/// Canonical text of a table: header row, then one line per row.
std::string csv_text(const CsvTable& table);
/// Sidecar schema describing the columns.
json csv_schema(const CsvTable& table, const std::string& file_name);

CsvTable coupling_table(const CouplingMatrix& c);
CsvTable trajectory_table(const Trajectory& tr, double time_scale = 1.0, const std::string& time_unit = "s");
CsvTable mode_table(const ModeSet& modes);

/// Lower-case hex SHA-256 of a byte string / file.
std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);

/// Collects output files in one directory and remembers them for the manifest.
class OutputSink {
 public:
  explicit OutputSink(std::filesystem::path dir);

  const std::filesystem::path& dir() const { return dir_; }
  /// Writes NAME.csv and NAME.schema.json.
  void write_csv(const std::string& name, const CsvTable& table);
  void write_json(const std::string& file_name, const json& j);
  void write_text(const std::string& file_name, const std::string& text);
  /// Interleaved little-endian float64 (re, im) per amplitude plus NAME.json with the basis layout.
  void write_states(const std::string& name, const Trajectory& tr);

  /// [{file, sha256, bytes}] for everything written so far, in write order.
  json file_list() const;

 private:
  void write_bytes(const std::string& file_name, const std::string& bytes);
  std::filesystem::path dir_;
  std::vector<std::string> files_;
};

}  // namespace ionxy
