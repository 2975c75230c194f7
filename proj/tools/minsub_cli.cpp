// Command-line front end. Everything goes through the C interface.
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "minsub/minsub.h"

namespace {

struct Common {
  std::string config;
  std::string out;
  long long seed = -1;
  int workers = 0;
  double tolerance = -1.0;
};

void add_common(CLI::App* sub, Common& c, bool needs_config) {
  auto* opt = sub->add_option("--config", c.config, "scenario file, or a directory for a batch");
  if (needs_config) opt->required();
  sub->add_option("--out", c.out, "output directory (env MINSUB_OUT_DIR)");
  sub->add_option("--seed", c.seed, "random seed override")->check(CLI::NonNegativeNumber);
  sub->add_option("--workers", c.workers, "parallel workers (env MINSUB_WORKERS)")
      ->check(CLI::PositiveNumber);
  sub->add_option("--tolerance", c.tolerance, "main tolerance override")->check(CLI::PositiveNumber);
}

std::string env_or(const char* name, const std::string& fallback) {
  const char* v = std::getenv(name);
  return v && *v ? std::string(v) : fallback;
}

int resolve_workers(int flag) {
  if (flag > 0) return flag;
  const std::string env = env_or("MINSUB_WORKERS", "");
  if (env.empty()) return 1;
  try {
    const int w = std::stoi(env);
    if (w > 0) return w;
  } catch (const std::exception&) {
  }
  std::cerr << "minsub: ignoring MINSUB_WORKERS='" << env << "'\n";
  return 1;
}

int fail_with(int status) {
  std::cerr << "minsub: " << minsub_status_name(status) << ": " << minsub_last_error() << "\n";
  return minsub_exit_code(status);
}

int run_experiment(const Common& c, const char* experiment) {
  const std::string out = c.out.empty() ? env_or("MINSUB_OUT_DIR", "") : c.out;
  minsub_overrides ov{};
  ov.out_dir = out.empty() ? nullptr : out.c_str();
  ov.experiment = experiment;
  ov.has_seed = c.seed >= 0;
  ov.seed = c.seed >= 0 ? static_cast<uint64_t>(c.seed) : 0;
  ov.has_tolerance = c.tolerance > 0.0;
  ov.tolerance = c.tolerance;
  ov.workers = resolve_workers(c.workers);

  std::error_code ec;
  char* json = nullptr;
  if (std::filesystem::is_directory(c.config, ec)) {
    const int st = minsub_run_batch(c.config.c_str(), &ov, &json);
    if (json) {
      std::cout << json;
      minsub_string_free(json);
    }
    return st == MINSUB_OK ? 0 : fail_with(st);
  }
  const int st = minsub_run_scenario(c.config.c_str(), &ov, &json);
  if (st != MINSUB_OK) return fail_with(st);
  std::cout << json << "\n";
  minsub_string_free(json);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"minsub: minimal submanifolds in metric families beta dt^2 + g_t"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(minsub_version()));

  struct Verb {
    const char* name;
    const char* experiment;
    const char* help;
  };
  const Verb verbs[] = {
      {"classify", "classify", "classify the monotonicity of a metric family"},
      {"solve-graph", "graph_solve", "solve the minimal graph equation by Newton's method"},
      {"dirichlet", "dirichlet", "Dirichlet problem with a sign constraint"},
      {"flow", "flow", "length-decreasing flow of a curve"},
      {"ball-threshold", "ball_threshold", "smallest geodesic ball holding a minimal curve"},
      {"probe-growth", "normal_growth", "growth of h_r along radial geodesics"},
      {"run", nullptr, "any scenario file, including formula_check"},
  };
  Common common;
  std::vector<std::pair<CLI::App*, const char*>> experiment_cmds;
  for (const auto& v : verbs) {
    CLI::App* sub = app.add_subcommand(v.name, v.help);
    add_common(sub, common, true);
    experiment_cmds.emplace_back(sub, v.experiment);
  }

  std::string suite = "all";
  std::string json_path;
  CLI::App* verify = app.add_subcommand("verify", "run the acceptance batteries");
  verify->add_option("suite", suite, "formulas, theorems, solvers or all");
  verify->add_option("--json", json_path, "also write the JSON report here");
  add_common(verify, common, false);

  CLI::App* report = app.add_subcommand("report", "merge report.json files into summary.json");
  add_common(report, common, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  for (const auto& [cmd, experiment] : experiment_cmds)
    if (cmd->parsed()) return run_experiment(common, experiment);

  if (verify->parsed()) {
    if (suite != "formulas" && suite != "theorems" && suite != "solvers" && suite != "all") {
      std::cerr << "minsub verify: unknown suite '" << suite << "'\n" << verify->help();
      return 2;
    }
    char* text = nullptr;
    char* json = nullptr;
    int all_pass = 0;
    const int st = minsub_verify(suite.c_str(), resolve_workers(common.workers), &text, &json, &all_pass);
    if (st != MINSUB_OK) return fail_with(st);
    std::cout << text;
    const std::string out = common.out.empty() ? env_or("MINSUB_OUT_DIR", "") : common.out;
    bool ok = true;
    if (!out.empty()) {
      std::filesystem::create_directories(out);
      std::ofstream(std::filesystem::path(out) / ("verify-" + suite + ".json")) << json;
      std::ofstream(std::filesystem::path(out) / ("verify-" + suite + ".txt")) << text;
    }
    if (!json_path.empty()) {
      std::ofstream os(json_path);
      os << json;
      ok = static_cast<bool>(os);
    }
    minsub_string_free(text);
    minsub_string_free(json);
    if (!ok) {
      std::cerr << "minsub verify: cannot write " << json_path << "\n";
      return 1;
    }
    return all_pass ? 0 : 1;
  }

  if (report->parsed()) {
    const std::string out = common.out.empty() ? env_or("MINSUB_OUT_DIR", "out") : common.out;
    char* json = nullptr;
    const int st = minsub_report(out.c_str(), &json);
    if (st != MINSUB_OK) return fail_with(st);
    std::cout << json;
    minsub_string_free(json);
    return 0;
  }
  return 2;
}
