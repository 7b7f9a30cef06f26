#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "chf/io.hpp"

namespace chf {

struct ExperimentSpec {
  std::string name;
  std::uint64_t seed = 1;
  std::map<std::string, std::string> params;
  std::string output_dir;  // empty: nothing is written
};

struct Verdict {
  std::string criterion;
  bool pass = false;
  std::string detail;
};

struct ExperimentResult {
  std::string name;
  std::map<std::string, double> summary_stats;
  std::map<std::string, std::string> effective_params;
  std::vector<std::string> series_files;  // relative to <output_dir>/<name>
  std::vector<Verdict> verdicts;
  double wall_seconds = 0.0;  // not part of the summary

  bool all_pass() const;
  Json summary_json(std::uint64_t seed) const;
  std::string summary_text(std::uint64_t seed) const;
};

struct ParamDoc {
  std::string key;
  std::string default_value;
  std::string help;
};

// Typed access to string parameters; defaults come from the experiment's
// declared ParamDocs.
class Params {
 public:
  Params(const std::vector<ParamDoc>& docs, const std::map<std::string, std::string>& given);
  double num(const std::string& key) const;
  int integer(const std::string& key) const;
  std::vector<double> list(const std::string& key) const;
  const std::map<std::string, std::string>& effective() const { return values_; }

 private:
  const std::string& raw(const std::string& key) const;
  std::map<std::string, std::string> values_;
};

class SeriesSink;

struct ExperimentInfo {
  std::string name;
  std::string description;
  std::vector<std::string> criteria;
  std::vector<ParamDoc> params;
  std::function<void(const Params&, std::uint64_t seed, SeriesSink&, ExperimentResult&)> body;
};

// Collects CSV series and writes them under the output directory.
class SeriesSink {
 public:
  explicit SeriesSink(std::string dir) : dir_(std::move(dir)) {}
  void add(const std::string& file, const CsvTable& table, ExperimentResult& r);
  bool enabled() const { return !dir_.empty(); }

 private:
  std::string dir_;
};

// Criteria "1".."13" from the acceptance list plus named property checks.
const std::map<std::string, std::string>& criteria_registry();
const std::vector<ExperimentInfo>& registry();
const ExperimentInfo& find_experiment(const std::string& name);

void validate_spec(const ExperimentSpec& spec);
ExperimentSpec spec_from_json(const Json& j);
ExperimentResult run(const ExperimentSpec& spec);

}  // namespace chf
