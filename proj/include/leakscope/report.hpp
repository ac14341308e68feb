#pragma once

#include <span>
#include <string>
#include <vector>

#include "leakscope/core.hpp"
#include "leakscope/metrics.hpp"

namespace leakscope::report {

// Percent rendering to one decimal, half away from zero, sign explicit.
// Values are kept as fractions internally; only reports show percentages.
long long percent_tenths(double fraction);
std::string format_tenths(long long tenths);  // 287 -> "28.7%", -1 -> "-0.1%"
std::string format_percent(double fraction);

// Mean of already-rounded per-benchmark values in exact integer tenths, half
// away from zero: (28.7 + 18.4)/2 renders as 23.6, not 23.5.
long long mean_tenths(const std::vector<long long>& tenths);

struct BenchmarkEntry {
  std::string benchmark;
  PLSResult result;
  metrics::tie_policy policy = metrics::tie_policy::half_credit;
};

struct ReportTables {
  std::string markdown;
  json summary;
};

// One row per (student pair, judge pair), one column per benchmark plus an
// Avg. column. Entries with differing tie policies are refused. Stability
// stats render as a second table with means in percentage points (2 dp) and
// variances in squared points (3 dp).
ReportTables build_report(std::span<const BenchmarkEntry> entries,
                          std::span<const metrics::StabilityStats> stability);

std::string render_stability_markdown(std::span<const metrics::StabilityStats> stats);

}  // namespace leakscope::report
