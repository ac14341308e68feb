#include "leakscope/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <tuple>

namespace leakscope::report {

long long percent_tenths(double fraction) { return std::llround(fraction * 1000.0); }

std::string format_tenths(long long tenths) {
  std::ostringstream os;
  if (tenths < 0) os << '-';
  long long mag = std::llabs(tenths);
  os << mag / 10 << '.' << mag % 10 << '%';
  return os.str();
}

std::string format_percent(double fraction) { return format_tenths(percent_tenths(fraction)); }

long long mean_tenths(const std::vector<long long>& tenths) {
  if (tenths.empty()) throw data_error("mean of zero benchmark cells");
  long long sum = 0;
  for (long long t : tenths) sum += t;
  const long long n = static_cast<long long>(tenths.size());
  // Exact decimal rounding, half away from zero; doing this in floating
  // point would round (28.7 + 18.4)/2 = 23.55 down.
  long long mag = (2 * std::llabs(sum) + n) / (2 * n);
  return sum < 0 ? -mag : mag;
}

namespace {

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  return buf;
}

struct RowKey {
  std::pair<std::string, std::string> students;
  std::pair<std::string, std::string> judges;
  bool operator<(const RowKey& o) const {
    return std::tie(students, judges) < std::tie(o.students, o.judges);
  }
  bool operator==(const RowKey& o) const {
    return students == o.students && judges == o.judges;
  }
};

}  // namespace

std::string render_stability_markdown(std::span<const metrics::StabilityStats> stats) {
  std::ostringstream os;
  os << "| Model Pairs | Mean | Variance |\n|---|---|---|\n";
  for (const metrics::StabilityStats& s : stats)
    os << "| " << s.label << " | " << fixed(s.mean * 100.0, 2) << " | "
       << fixed(s.variance * 10000.0, 3) << " |\n";
  return os.str();
}

ReportTables build_report(std::span<const BenchmarkEntry> entries,
                          std::span<const metrics::StabilityStats> stability) {
  if (entries.empty() && stability.empty()) throw data_error("nothing to report");

  for (size_t i = 1; i < entries.size(); ++i)
    if (entries[i].policy != entries[0].policy)
      throw data_error("mixed tie policies across inputs; results are not comparable");

  std::vector<std::string> benchmarks;
  for (const BenchmarkEntry& e : entries)
    if (std::find(benchmarks.begin(), benchmarks.end(), e.benchmark) == benchmarks.end())
      benchmarks.push_back(e.benchmark);

  std::vector<RowKey> row_order;
  std::map<RowKey, std::map<std::string, const BenchmarkEntry*>> rows;
  for (const BenchmarkEntry& e : entries) {
    RowKey key{e.result.student_pair, e.result.judge_pair};
    if (!rows.count(key)) row_order.push_back(key);
    auto& cells = rows[key];
    if (!cells.emplace(e.benchmark, &e).second)
      throw data_error("duplicate entry for benchmark \"" + e.benchmark + "\" and pair " +
                       key.students.first + " & " + key.students.second);
  }

  std::ostringstream md;
  json summary;
  summary["benchmarks"] = benchmarks;
  if (!entries.empty())
    summary["tie_policy"] = metrics::to_string(entries[0].policy);
  summary["rows"] = json::array();

  if (!entries.empty()) {
    md << "| Student Pair |";
    for (const std::string& b : benchmarks) md << ' ' << b << " |";
    md << " Avg. |\n|---|";
    for (size_t i = 0; i < benchmarks.size(); ++i) md << "---|";
    md << "---|\n";

    for (const RowKey& key : row_order) {
      const auto& cells = rows[key];
      md << "| " << key.students.first << " & " << key.students.second << " |";
      std::vector<long long> tenths;
      json cell_json = json::object();
      for (const std::string& b : benchmarks) {
        auto it = cells.find(b);
        if (it == cells.end()) {
          md << " - |";
          continue;
        }
        long long t = percent_tenths(it->second->result.pls);
        tenths.push_back(t);
        md << ' ' << format_tenths(t) << " |";
        cell_json[b] = json{{"pls", it->second->result.pls},
                            {"percent", format_tenths(t)},
                            {"n_questions", it->second->result.n_questions}};
        if (it->second->result.ci95)
          cell_json[b]["ci95"] = json::array(
              {it->second->result.ci95->first, it->second->result.ci95->second});
      }
      const long long avg = mean_tenths(tenths);
      md << ' ' << format_tenths(avg) << " |\n";
      summary["rows"].push_back(
          json{{"student_pair", json::array({key.students.first, key.students.second})},
               {"judge_pair", json::array({key.judges.first, key.judges.second})},
               {"cells", std::move(cell_json)},
               {"avg_percent", format_tenths(avg)}});
    }
  }

  if (!stability.empty()) {
    if (!entries.empty()) md << '\n';
    md << render_stability_markdown(stability);
    json rows_json = json::array();
    for (const metrics::StabilityStats& s : stability)
      rows_json.push_back(json{{"label", s.label},
                               {"mean", fixed(s.mean * 100.0, 2)},
                               {"variance", fixed(s.variance * 10000.0, 3)},
                               {"values", s.values}});
    summary["stability"] = std::move(rows_json);
  }

  return {md.str(), std::move(summary)};
}

}  // namespace leakscope::report
