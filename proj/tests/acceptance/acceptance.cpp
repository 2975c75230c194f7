// Runs the full verification battery twice through the C API and prints
// one line per acceptance criterion. Exit status 1 if any criterion fails.
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "minsub/minsub.h"

namespace {

const char* const kTitles[] = {
    "",
    "Laplacian-of-tau formula on flowed curves",
    "conformal change of mean curvature",
    "graph operator against its specializations",
    "constant-residual law on warped models",
    "confinement of converged flows to a level set",
    "no minimal curves in strictly monotone models",
    "sphere ball threshold at half the diameter",
    "collapse in the hyperbolic plane",
    "Dirichlet rigidity for cosh and exp warping",
    "byte-identical verify reports",
};

struct Run {
  std::string text, json;
  bool ok = false;
};

Run run(int workers) {
  Run r;
  char* text = nullptr;
  char* json = nullptr;
  int all_pass = 0;
  const int st = minsub_verify("all", workers, &text, &json, &all_pass);
  if (st != MINSUB_OK) {
    std::fprintf(stderr, "verify failed: %s\n", minsub_last_error());
    return r;
  }
  r.text = text;
  r.json = json;
  r.ok = true;
  minsub_string_free(text);
  minsub_string_free(json);
  return r;
}

}  // namespace

int main() {
  const Run first = run(1);
  // A second run with a different worker count must not change a byte.
  const Run second = run(2);
  if (!first.ok || !second.ok) return 1;

  struct Tally {
    int rows = 0, passed = 0;
    std::string worst;
  };
  std::map<int, Tally> by;
  const auto doc = nlohmann::json::parse(first.json);
  for (const auto& row : doc.at("rows")) {
    Tally& t = by[row.at("criterion").get<int>()];
    ++t.rows;
    if (row.at("pass").get<bool>()) {
      ++t.passed;
    } else if (t.worst.empty()) {
      char buf[512];
      const std::string measured = row.at("measured").is_null() ? "nan" : row.at("measured").dump();
      std::snprintf(buf, sizeof buf, "%s: measured %s, needs %s %g", row.at("name").get<std::string>().c_str(),
                    measured.c_str(), row.at("relation").get<std::string>().c_str(),
                    row.at("tolerance").get<double>());
      t.worst = buf;
    }
  }

  bool all = true;
  for (int c = 1; c <= 9; ++c) {
    const Tally& t = by[c];
    const bool pass = t.rows > 0 && t.passed == t.rows;
    all = all && pass;
    std::printf("[%s] criterion %d  %-48s %d/%d checks%s%s\n", pass ? "PASS" : "FAIL", c, kTitles[c],
                t.passed, t.rows, t.worst.empty() ? "" : "  first failure: ", t.worst.c_str());
  }
  const bool same = first.text == second.text && first.json == second.json;
  all = all && same;
  std::printf("[%s] criterion 10 %-48s text %s, json %s (%zu bytes)\n", same ? "PASS" : "FAIL", kTitles[10],
              first.text == second.text ? "equal" : "differ", first.json == second.json ? "equal" : "differ",
              first.json.size());
  return all ? 0 : 1;
}
