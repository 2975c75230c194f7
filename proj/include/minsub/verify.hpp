#pragma once

#include <string>
#include <vector>

namespace minsub {

struct VerifyRow {
  int criterion = 0;
  std::string name;
  double measured = 0.0;
  std::string relation;  // "<=" or ">="
  double tolerance = 0.0;
  bool pass = false;
  std::string detail;
};

struct VerifyReport {
  std::string suite;
  std::vector<VerifyRow> rows;
  bool all_pass() const;
  std::string to_text() const;
  std::string to_json() const;
};

struct VerifyOptions {
  int workers = 1;
};

// formulas (criteria 1-4), theorems (5-8), solvers (9), or all.
// InvalidArgument for any other name. Failing checks become failing rows;
// nothing numeric is thrown.
VerifyReport verify_suite(const std::string& suite, const VerifyOptions& opts = {});

// One criterion's rows.
std::vector<VerifyRow> verify_criterion(int criterion, const VerifyOptions& opts = {});

const std::vector<std::string>& verify_suite_names();

}  // namespace minsub
