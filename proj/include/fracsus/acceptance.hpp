#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "fracsus/io.hpp"

namespace fracsus {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool numeric_pass = false;  // tolerances met
  double seconds = 0.0;
  double budget_seconds = 0.0;
  Json metrics;        // deterministic numbers behind the verdict
  std::string detail;  // one-line summary

  bool within_budget() const noexcept { return seconds < budget_seconds; }
  bool pass() const noexcept { return numeric_pass && within_budget(); }
};

struct AcceptanceOptions {
  std::uint64_t seed = 1;  // random sample points of criterion 1
  std::vector<int> only;   // empty: all ten
};

using ResultSink = std::function<void(const CriterionResult&)>;

CriterionResult run_criterion(int id, const AcceptanceOptions& opts);

// Criteria 1-9, then 10 (a second pass over 1-9 compared byte for byte).
std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& opts, const ResultSink& sink = {});

// {"criteria": [...]} without timings; identical inputs give identical bytes.
Json report_data(const std::vector<CriterionResult>& results);
// Timings and budgets, kept with the run metadata.
Json report_timings(const std::vector<CriterionResult>& results);

std::string format_line(const CriterionResult& r);

}  // namespace fracsus
