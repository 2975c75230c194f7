#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "minsub/metric.hpp"

namespace minsub {

// Command-line and environment values that take precedence over the file.
struct ScenarioOverrides {
  std::string out_dir;              // replaces the config's out_dir when set
  std::string expect_experiment;    // ConfigError when the file asks for another one
  std::optional<std::uint64_t> seed;
  std::optional<double> tolerance;  // the experiment's main tolerance
  int workers = 1;
};

struct ScenarioResult {
  std::string id;
  std::string experiment;
  std::string out_dir;   // <out>/<id>
  std::string report;    // report.json contents
  std::string headline;  // one line for terminal output
};

extern const char* const kExperiments[7];

// Builds a metric from a TOML table with keys model, mode, product, collar
// and the sub-tables params and functions.
MetricFamily metric_from_toml(const std::string& toml_text);

// Parses, runs and writes report.json plus CSV artifacts. ConfigError names
// the offending key; other errors are rethrown with "scenario <id>:" prefixed.
ScenarioResult run_scenario(const std::string& config_path, const ScenarioOverrides& ov = {});

struct BatchResult {
  std::vector<ScenarioResult> results;  // id order
  std::vector<std::string> failures;    // "id: message", id order
  int exit_code = 0;                    // code of the first failure in id order
  std::string summary_path;
};

// Every *.toml in the directory. Duplicate ids are a ConfigError before
// anything runs. Scenarios run on up to ov.workers threads.
BatchResult run_batch(const std::string& dir, const ScenarioOverrides& ov = {});

// Merges <out_dir>/*/report.json into <out_dir>/summary.json, id order.
std::string merge_reports(const std::string& out_dir);

// 2 for configuration problems, 1 for everything else.
int exit_code_for(int error_code);

}  // namespace minsub
