#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "minsub/errors.hpp"
#include "minsub/scenario.hpp"

using namespace minsub;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("minsub_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

std::string slurp(const fs::path& p) {
  std::ifstream is(p);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

ErrorCode code_of(const std::function<void()>& f, std::string* msg = nullptr) {
  try {
    f();
  } catch (const Error& e) {
    if (msg) *msg = e.what();
    return e.code();
  }
  return static_cast<ErrorCode>(0);
}

const char* kClassify = R"(id = "hyp"
experiment = "classify"
[metric]
model = "hyperbolic_polar"
[classify]
region = [[0.2, 3.0], [0.0, 6.0]]
samples = 5
)";

}  // namespace

TEST(MetricFromToml, BuildsWarpedModels) {
  const MetricFamily w = metric_from_toml(R"(model = "warped"
functions = { f = { kind = "cosh" } }
)");
  Vec p(2);
  p << 0.5, 1.0;
  EXPECT_NEAR(w.ambient(p)(1, 1), std::cosh(0.5) * std::cosh(0.5), 1e-12);
}

TEST(MetricFromToml, UnknownModel) {
  EXPECT_EQ(code_of([] { metric_from_toml("model = \"torus\"\n"); }), ErrorCode::UnknownModel);
}

TEST(Scenario, MissingMetricNamesTheKey) {
  const fs::path d = scratch("missing_metric");
  write(d / "a.toml", "id = \"a\"\nexperiment = \"classify\"\n");
  std::string msg;
  EXPECT_EQ(code_of([&] { run_scenario((d / "a.toml").string()); }, &msg), ErrorCode::ConfigError);
  EXPECT_NE(msg.find("missing key 'metric'"), std::string::npos) << msg;
  EXPECT_EQ(exit_code_for(static_cast<int>(ErrorCode::ConfigError)), 2);
}

TEST(Scenario, UnknownKeyIsReportedWithItsPath) {
  const fs::path d = scratch("unknown_key");
  write(d / "a.toml", std::string(kClassify) + "colour = 3\n");
  std::string msg;
  EXPECT_EQ(code_of([&] { run_scenario((d / "a.toml").string()); }, &msg), ErrorCode::ConfigError);
  EXPECT_NE(msg.find("classify.colour"), std::string::npos) << msg;
}

TEST(Scenario, ClassifyWritesAReport) {
  const fs::path d = scratch("classify");
  write(d / "a.toml", kClassify);
  ScenarioOverrides ov;
  ov.out_dir = (d / "out").string();
  const ScenarioResult r = run_scenario((d / "a.toml").string(), ov);
  EXPECT_EQ(r.id, "hyp");
  EXPECT_NE(r.headline.find("expanding"), std::string::npos);
  EXPECT_TRUE(fs::exists(d / "out" / "hyp" / "report.json"));
  EXPECT_TRUE(fs::exists(d / "out" / "hyp" / "witnesses.csv"));
}

TEST(Scenario, WrongExperimentForTheCommand) {
  const fs::path d = scratch("wrong_experiment");
  write(d / "a.toml", kClassify);
  ScenarioOverrides ov;
  ov.out_dir = (d / "out").string();
  ov.expect_experiment = "flow";
  EXPECT_EQ(code_of([&] { run_scenario((d / "a.toml").string(), ov); }), ErrorCode::ConfigError);
}

TEST(Batch, DuplicateIdsStopBeforeRunning) {
  const fs::path d = scratch("duplicates");
  write(d / "a.toml", kClassify);
  write(d / "b.toml", kClassify);
  ScenarioOverrides ov;
  ov.out_dir = (d / "out").string();
  EXPECT_EQ(code_of([&] { run_batch(d.string(), ov); }), ErrorCode::ConfigError);
  EXPECT_FALSE(fs::exists(d / "out" / "hyp"));
}

TEST(Batch, RerunsAreByteIdentical) {
  const fs::path d = scratch("rerun");
  write(d / "flow.toml", R"(id = "cyl"
experiment = "flow"
seed = 3
[metric]
model = "flat"
params = { period = 6.283185307179586 }
[curve]
kind = "latitude"
level = 0.2
amplitude = 0.2
mode = 3
vertices = 48
)");
  write(d / "hyp.toml", kClassify);
  ScenarioOverrides ov;
  ov.workers = 2;
  ov.out_dir = (d / "one").string();
  const BatchResult a = run_batch(d.string(), ov);
  ov.out_dir = (d / "two").string();
  const BatchResult b = run_batch(d.string(), ov);
  ASSERT_EQ(a.exit_code, 0);
  ASSERT_EQ(a.results.size(), 2u);
  EXPECT_EQ(a.results[0].id, "cyl");
  for (const char* f : {"cyl/trace.csv", "cyl/report.json", "hyp/witnesses.csv", "summary.json"})
    EXPECT_EQ(slurp(d / "one" / f), slurp(d / "two" / f)) << f;
}
