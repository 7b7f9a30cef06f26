#pragma once

#include <json.hpp>
#include <string>
#include <vector>

#include "chf/core.hpp"

namespace chf {

using Json = nlohmann::json;

// Shortest round-trip text for a double; "nan"/"inf" spelled out.
std::string format_double(double v);

// RFC-4180 field quoting.
std::string csv_quote(const std::string& field);

class CsvTable {
 public:
  CsvTable() = default;
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  void add_row(const std::vector<double>& values);
  void add_row_text(const std::vector<std::string>& fields);

  const std::vector<std::string>& header() const { return header_; }
  std::size_t rows() const { return rows_.size(); }
  std::string to_string() const;
  void write(const std::string& path) const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

struct NumericCsv {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};
NumericCsv read_numeric_csv(const std::string& path);

// Column names "<prefix>0", "<prefix>1", ...
std::vector<std::string> indexed_names(const std::string& prefix, int n);

void write_text(const std::string& path, const std::string& text);
std::string read_text(const std::string& path);
void ensure_dir(const std::string& path);

// Matrices in JSON: nested row arrays, a flat array (vector), or
// {"identity": n, "scale": s} / {"diag": [...]} / {"zeros": [r, c]}.
Mat mat_from_json(const Json& j);
Vec vec_from_json(const Json& j);
Json to_json(const Mat& m);
Json to_json_vec(const Vec& v);

}  // namespace chf
