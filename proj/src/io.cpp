#include "chf/io.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace chf {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string csv_quote(const std::string& f) {
  if (f.find_first_of(",\"\r\n") == std::string::npos) return f;
  std::string out = "\"";
  for (char c : f) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

void CsvTable::add_row(const std::vector<double>& values) {
  std::vector<std::string> r;
  r.reserve(values.size());
  for (double v : values) r.push_back(format_double(v));
  add_row_text(r);
}

void CsvTable::add_row_text(const std::vector<std::string>& fields) {
  if (!header_.empty() && fields.size() != header_.size())
    throw ShapeError("csv row has " + std::to_string(fields.size()) + " fields, header has " +
                     std::to_string(header_.size()));
  rows_.push_back(fields);
}

std::string CsvTable::to_string() const {
  std::string out;
  auto line = [&out](const std::vector<std::string>& fs) {
    for (std::size_t i = 0; i < fs.size(); ++i) {
      if (i) out += ',';
      out += csv_quote(fs[i]);
    }
    out += "\r\n";
  };
  line(header_);
  for (const auto& r : rows_) line(r);
  return out;
}

void CsvTable::write(const std::string& path) const { write_text(path, to_string()); }

namespace {
std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}
}  // namespace

NumericCsv read_numeric_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  NumericCsv out;
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty csv " + path);
  out.header = split_csv_line(line);
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    auto fs = split_csv_line(line);
    if (fs.size() != out.header.size()) throw IoError("ragged csv row in " + path);
    std::vector<double> r;
    for (auto& f : fs) {
      try {
        r.push_back(std::stod(f));
      } catch (const std::exception&) {
        throw IoError("non-numeric field '" + f + "' in " + path);
      }
    }
    out.rows.push_back(std::move(r));
  }
  return out;
}

std::vector<std::string> indexed_names(const std::string& prefix, int n) {
  std::vector<std::string> v;
  for (int i = 0; i < n; ++i) v.push_back(prefix + std::to_string(i));
  return v;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << text;
  if (!out) throw IoError("write failed for " + path);
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void ensure_dir(const std::string& path) {
  std::error_code ec;
  std::filesystem::create_directories(path, ec);
  if (ec) throw IoError("cannot create directory " + path + ": " + ec.message());
}

Mat mat_from_json(const Json& j) {
  if (j.is_number()) {
    Mat m(1, 1);
    m(0, 0) = j.get<double>();
    return m;
  }
  if (j.is_object()) {
    if (j.contains("identity")) {
      int n = j.at("identity").get<int>();
      double s = j.value("scale", 1.0);
      return s * Mat::Identity(n, n);
    }
    if (j.contains("diag")) return vec_from_json(j.at("diag")).asDiagonal();
    if (j.contains("zeros")) {
      auto d = j.at("zeros");
      return Mat::Zero(d.at(0).get<int>(), d.at(1).get<int>());
    }
    throw ParamError("unrecognized matrix object: " + j.dump());
  }
  if (!j.is_array() || j.empty()) throw ParamError("matrix must be a non-empty array");
  if (!j.front().is_array()) {
    Vec v = vec_from_json(j);
    return v;
  }
  int r = static_cast<int>(j.size());
  int c = static_cast<int>(j.front().size());
  Mat m(r, c);
  for (int i = 0; i < r; ++i) {
    if (!j[i].is_array() || static_cast<int>(j[i].size()) != c)
      throw ParamError("ragged matrix rows");
    for (int k = 0; k < c; ++k) m(i, k) = j[i][k].get<double>();
  }
  return m;
}

Vec vec_from_json(const Json& j) {
  if (j.is_number()) return Vec::Constant(1, j.get<double>());
  if (!j.is_array()) throw ParamError("vector must be an array");
  Vec v(static_cast<int>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<int>(i)] = j[i].get<double>();
  return v;
}

Json to_json(const Mat& m) {
  Json out = Json::array();
  for (int i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (int k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
    out.push_back(row);
  }
  return out;
}

Json to_json_vec(const Vec& v) {
  Json out = Json::array();
  for (int i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

}  // namespace chf
