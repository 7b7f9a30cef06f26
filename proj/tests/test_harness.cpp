#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "chf/experiments.hpp"
#include "chf/rng.hpp"

using namespace chf;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentSpec small_sweep(const std::string& out = "") {
  ExperimentSpec s;
  s.name = "gain-sweep";
  s.seed = 1;
  s.params = {{"T", "20"}, {"gains", "1,2,4"}};
  s.output_dir = out;
  return s;
}

fs::path fresh_dir(const std::string& tag) {
  fs::path d = fs::path(testing::TempDir()) / ("chf_" + tag);
  fs::remove_all(d);
  return d;
}

}  // namespace

TEST(Run, RepeatedRunsGiveIdenticalSummaries) {
  auto a = run(small_sweep()), b = run(small_sweep());
  EXPECT_EQ(a.summary_text(1), b.summary_text(1));
}

TEST(Run, UnknownExperiment) {
  ExperimentSpec s;
  s.name = "nonexistent";
  EXPECT_THROW(run(s), UnknownExperiment);
  EXPECT_THROW(find_experiment("nonexistent"), UnknownExperiment);
}

TEST(Run, UnknownOrMalformedParameter) {
  auto s = small_sweep();
  s.params["bogus"] = "1";
  EXPECT_THROW(run(s), ParamError);
  s = small_sweep();
  s.params["T"] = "sixty";
  EXPECT_THROW(validate_spec(s), ParamError);
}

TEST(Run, WritesSummaryAndSeries) {
  fs::path d = fresh_dir("run");
  auto r = run(small_sweep(d.string()));
  fs::path sum = d / "gain-sweep" / "summary.json";
  ASSERT_TRUE(fs::exists(sum));
  Json j = Json::parse(slurp(sum));
  EXPECT_EQ(j.at("experiment"), "gain-sweep");
  EXPECT_EQ(j.at("seed"), 1);
  EXPECT_EQ(j.at("params").at("gains"), "1,2,4");
  EXPECT_EQ(j.at("all_pass").get<bool>(), r.all_pass());
  ASSERT_FALSE(r.series_files.empty());
  for (const auto& f : r.series_files) EXPECT_TRUE(fs::exists(d / "gain-sweep" / f)) << f;
  // same spec, second directory: byte-identical series
  fs::path d2 = fresh_dir("run2");
  auto r2 = run(small_sweep(d2.string()));
  ASSERT_EQ(r.series_files.size(), r2.series_files.size());
  for (std::size_t i = 0; i < r.series_files.size(); ++i)
    EXPECT_EQ(slurp(d / "gain-sweep" / r.series_files[i]), slurp(d2 / "gain-sweep" / r2.series_files[i]));
  fs::remove_all(d);
  fs::remove_all(d2);
}

TEST(Registry, VerdictsReferenceRegisteredCriteria) {
  const auto& crit = criteria_registry();
  std::map<std::string, int> owners;
  std::set<std::string> names;
  for (const auto& e : registry()) {
    EXPECT_TRUE(names.insert(e.name).second) << "duplicate " << e.name;
    for (const auto& c : e.criteria) {
      EXPECT_TRUE(crit.count(c)) << e.name << " declares " << c;
      ++owners[c];
    }
  }
  for (const auto& [c, n] : owners) EXPECT_EQ(n, 1) << c << " claimed by " << n << " experiments";
  for (int i = 1; i <= 13; ++i) {
    std::string id = std::to_string(i);
    bool covered = owners.count(id) || (i == 10 && owners.count("10a") && owners.count("10b"));
    EXPECT_TRUE(covered) << "criterion " << id;
  }
}

TEST(Registry, ExpectedExperimentsPresent) {
  for (const char* n : {"gain-sweep", "lyapunov-probe", "oracle-match", "ica-bench", "tuning-run", "priming",
                        "repetition-suppression", "repetition-enhancement", "noise-before-integrator",
                        "learning-order", "deconv-roundtrip", "hierarchy-control"})
    EXPECT_NO_THROW(find_experiment(n)) << n;
}

TEST(Registry, EmittedVerdictsMatchDeclaration) {
  auto r = run(small_sweep());
  const auto& info = find_experiment("gain-sweep");
  for (const auto& v : r.verdicts)
    EXPECT_NE(std::find(info.criteria.begin(), info.criteria.end(), v.criterion), info.criteria.end())
        << v.criterion;
}

TEST(SpecJson, ParsesAllValueKinds) {
  Json j = Json::parse(R"({"name": "gain-sweep", "seed": 7, "output_dir": "o",
                           "params": {"T": 10, "gains": [1, 2], "dt": "0.01"}})");
  ExperimentSpec s = spec_from_json(j);
  EXPECT_EQ(s.name, "gain-sweep");
  EXPECT_EQ(s.seed, 7u);
  EXPECT_EQ(s.output_dir, "o");
  EXPECT_EQ(s.params.at("T"), "10");
  EXPECT_EQ(s.params.at("gains"), "1,2");
  EXPECT_EQ(s.params.at("dt"), "0.01");
  EXPECT_THROW(spec_from_json(Json::parse(R"({"seed": 1})")), ParamError);
  EXPECT_THROW(spec_from_json(Json::parse(R"({"name": "x", "params": {"a": true}})")), ParamError);
}

TEST(Params, DefaultsAndOverrides) {
  std::vector<ParamDoc> docs{{"a", "1.5", ""}, {"n", "3", ""}, {"l", "1,2,3", ""}};
  Params p(docs, {{"a", "2"}});
  EXPECT_DOUBLE_EQ(p.num("a"), 2.0);
  EXPECT_EQ(p.integer("n"), 3);
  EXPECT_EQ(p.list("l"), (std::vector<double>{1, 2, 3}));
  EXPECT_THROW(Params(docs, {{"zz", "1"}}), ParamError);
  EXPECT_THROW(Params(docs, {{"n", "2.5"}}).integer("n"), ParamError);
}

TEST(Csv, Rfc4180Quoting) {
  EXPECT_EQ(csv_quote("plain"), "plain");
  EXPECT_EQ(csv_quote("a,b"), "\"a,b\"");
  EXPECT_EQ(csv_quote("say \"hi\""), "\"say \"\"hi\"\"\"");
  CsvTable t({"name", "value"});
  t.add_row_text({"x,y", "1"});
  EXPECT_EQ(t.to_string(), "name,value\r\n\"x,y\",1\r\n");
  EXPECT_THROW(t.add_row({1.0}), ShapeError);
}

TEST(Csv, FormatDoubleRoundTrips) {
  Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    double v = rng.normal() * std::pow(10.0, rng.uniform(-20, 20));
    EXPECT_EQ(std::stod(format_double(v)), v);
  }
  EXPECT_EQ(format_double(0.5), "0.5");
  EXPECT_EQ(format_double(std::nan("")), "nan");
}

TEST(Rng, DeterministicAndIndependentStreams) {
  Rng a(42), b(42), c(42, 1), d(43);
  for (int i = 0; i < 10; ++i) {
    double x = a.uniform();
    EXPECT_EQ(x, b.uniform());
    EXPECT_NE(x, c.uniform());
    EXPECT_NE(x, d.uniform());
  }
  Rng s = a.split(3);
  EXPECT_EQ(s.uniform(), a.split(3).uniform());
}

TEST(Rng, MomentsAreSane) {
  Rng r(5);
  double m = 0, v = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    double x = r.normal();
    m += x / n;
    v += x * x / n;
  }
  EXPECT_NEAR(m, 0.0, 0.01);
  EXPECT_NEAR(v, 1.0, 0.02);
}
