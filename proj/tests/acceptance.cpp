// Runs every registered experiment at its defaults and prints one line per
// acceptance criterion. Exit status is nonzero when any criterion fails.
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "chf/experiments.hpp"

using namespace chf;

namespace {

struct Outcome {
  bool seen = false;
  bool pass = true;
  std::string detail;
};

void merge(Outcome& o, bool pass, const std::string& detail) {
  o.pass = (o.seen ? o.pass : true) && pass;
  o.seen = true;
  if (!o.detail.empty()) o.detail += "; ";
  o.detail += detail;
}

}  // namespace

int main() {
  const std::uint64_t seed = 1;
  std::map<int, Outcome> crit;
  std::vector<std::string> unstable;

  for (const auto& info : registry()) {
    ExperimentSpec spec;
    spec.name = info.name;
    spec.seed = seed;
    ExperimentResult first, second;
    try {
      first = run(spec);
      second = run(spec);
    } catch (const std::exception& e) {
      std::fprintf(stderr, "%s raised: %s\n", info.name.c_str(), e.what());
      for (const auto& c : info.criteria) {
        int id = std::atoi(c.c_str());
        if (id >= 1 && id <= 13) merge(crit[id], false, info.name + " raised an error");
      }
      continue;
    }
    if (first.summary_text(seed) != second.summary_text(seed)) unstable.push_back(info.name);
    for (const auto& v : first.verdicts) {
      if (v.criterion.empty() || !std::isdigit(static_cast<unsigned char>(v.criterion[0]))) continue;
      int id = std::atoi(v.criterion.c_str());  // "10a" and "10b" both count toward 10
      std::string tag = v.criterion.size() > 2 || (id < 10 && v.criterion.size() > 1) ? "[" + v.criterion + "] " : "";
      merge(crit[id], v.pass, tag + v.detail);
    }
  }

  std::string det = unstable.empty() ? std::string("every experiment reproduced its summary byte for byte")
                                     : "summaries differ for:";
  for (const auto& n : unstable) det += " " + n;
  merge(crit[13], unstable.empty(), det);

  int failed = 0;
  for (int i = 1; i <= 13; ++i) {
    Outcome& o = crit[i];
    if (!o.seen) {
      o.pass = false;
      o.detail = "no experiment reported this criterion";
    }
    if (!o.pass) ++failed;
    std::printf("criterion %d: %s %s\n", i, o.pass ? "PASS" : "FAIL", o.detail.c_str());
  }
  std::printf("%d of 13 criteria pass\n", 13 - failed);
  return failed == 0 ? 0 : 1;
}
