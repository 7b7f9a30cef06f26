#include <CLI11.hpp>
#include <iostream>
#include <sstream>

#include "chf/experiments.hpp"

namespace {

std::string experiment_help() {
  std::ostringstream ss;
  ss << "Experiments and parameters (defaults in brackets):\n";
  for (const auto& e : chf::registry()) {
    ss << "  " << e.name << ": " << e.description << "\n";
    for (const auto& p : e.params) ss << "      " << p.key << " [" << p.default_value << "]  " << p.help << "\n";
  }
  return ss.str();
}

std::map<std::string, std::string> parse_params(const std::vector<std::string>& kv) {
  std::map<std::string, std::string> out;
  for (const auto& s : kv) {
    auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw chf::ParamError("--param expects k=v, got '" + s + "'");
    out[s.substr(0, eq)] = s.substr(eq + 1);
  }
  return out;
}

int report(const chf::ExperimentResult& r, const chf::ExperimentSpec& spec) {
  for (const auto& v : r.verdicts)
    std::cout << r.name << " [" << v.criterion << "] " << (v.pass ? "PASS" : "FAIL") << "  " << v.detail << "\n";
  if (!spec.output_dir.empty()) std::cout << "wrote " << spec.output_dir << "/" << r.name << "/summary.json\n";
  return r.all_pass() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Controlled hierarchical filtering simulator"};
  app.footer(experiment_help());
  app.require_subcommand(1);

  std::uint64_t seed = 1;
  std::string out = "out";
  std::vector<std::string> kv;
  std::string name, spec_path;

  auto* run = app.add_subcommand("run", "Run a registered experiment");
  run->add_option("name", name, "experiment name")->required();
  run->add_option("--seed", seed, "64-bit seed");
  run->add_option("--out", out, "output directory (empty string disables files)");
  run->add_option("--param", kv, "parameter override k=v (repeatable)");
  run->footer(experiment_help());

  auto* list = app.add_subcommand("list", "List experiments and the criteria they check");

  auto* validate = app.add_subcommand("validate", "Validate a JSON spec file; with --run also execute it");
  bool also_run = false;
  validate->add_option("spec", spec_path, "path to spec.json")->required();
  validate->add_flag("--run", also_run, "run the spec after validation");
  validate->add_option("--seed", seed, "override the spec's seed");
  validate->add_option("--out", out, "override the spec's output directory");
  validate->add_option("--param", kv, "parameter override k=v (repeatable)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*list) {
      for (const auto& e : chf::registry()) {
        std::cout << e.name << "  (";
        for (std::size_t i = 0; i < e.criteria.size(); ++i) std::cout << (i ? ", " : "") << e.criteria[i];
        std::cout << ")\n    " << e.description << "\n";
      }
      return 0;
    }
    if (*run) {
      chf::ExperimentSpec spec;
      spec.name = name;
      spec.seed = seed;
      spec.output_dir = out;
      spec.params = parse_params(kv);
      return report(chf::run(spec), spec);
    }
    if (*validate) {
      chf::ExperimentSpec spec = chf::spec_from_json(chf::Json::parse(chf::read_text(spec_path)));
      if (validate->count("--seed")) spec.seed = seed;
      if (validate->count("--out") || spec.output_dir.empty()) spec.output_dir = out;
      for (const auto& [k, v] : parse_params(kv)) spec.params[k] = v;
      chf::validate_spec(spec);
      std::cout << "spec ok: " << spec.name << " seed " << spec.seed << "\n";
      if (also_run) return report(chf::run(spec), spec);
      return 0;
    }
  } catch (const chf::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const chf::Json::exception& e) {
    std::cerr << "error: bad JSON: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
