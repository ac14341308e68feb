#include "leakscope/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "leakscope/rng.hpp"

namespace leakscope::metrics {

std::string to_string(tie_policy p) {
  return p == tie_policy::half_credit ? "half_credit" : "exclude";
}

tie_policy tie_policy_from_string(const std::string& s) {
  if (s == "half_credit") return tie_policy::half_credit;
  if (s == "exclude") return tie_policy::exclude;
  throw data_error("unknown tie policy \"" + s + "\"");
}

void LeaderboardSnapshot::validate() const {
  std::set<std::string> seen;
  for (const std::string& id : ranking)
    if (!seen.insert(id).second)
      throw data_error("duplicate id \"" + id + "\" in leaderboard \"" + name + "\"");
}

int LeaderboardSnapshot::rank_of(const std::string& id) const {
  auto it = std::find(ranking.begin(), ranking.end(), id);
  if (it == ranking.end())
    throw data_error("model \"" + id + "\" not present in leaderboard \"" + name + "\"");
  return static_cast<int>(it - ranking.begin()) + 1;
}

// ---------------------------------------------------------------------------
// Win rates
// ---------------------------------------------------------------------------

namespace {

struct TallyCounts {
  long long wins = 0;   // wins for students.first
  long long ties = 0;
  long long losses = 0;
  long long total() const { return wins + ties + losses; }
};

double rate_from_counts(const TallyCounts& c, tie_policy policy) {
  if (policy == tie_policy::half_credit) {
    long long n = c.total();
    if (n == 0) throw data_error("empty input: no judgments to aggregate");
    return (static_cast<double>(c.wins) + 0.5 * static_cast<double>(c.ties)) /
           static_cast<double>(n);
  }
  long long n = c.wins + c.losses;
  if (n == 0) throw data_error("empty input: no non-tie judgments to aggregate");
  return static_cast<double>(c.wins) / static_cast<double>(n);
}

TallyCounts tally(std::span<const JudgmentRecord> judgments,
                  const std::pair<std::string, std::string>& students,
                  const std::string& judge) {
  if (judgments.empty()) throw data_error("empty input: no judgments to aggregate");
  TallyCounts counts;
  for (const JudgmentRecord& rec : judgments) {
    if (rec.judge != judge)
      throw data_error("judgment references judge \"" + rec.judge + "\", expected \"" + judge +
                       "\"");
    const bool forward = rec.model_a == students.first && rec.model_b == students.second;
    const bool reverse = rec.model_a == students.second && rec.model_b == students.first;
    if (!forward && !reverse)
      throw data_error("judgment references unknown student pair (\"" + rec.model_a + "\", \"" +
                       rec.model_b + "\")");
    switch (rec.result) {
      case verdict::tie: ++counts.ties; break;
      case verdict::a: forward ? ++counts.wins : ++counts.losses; break;
      case verdict::b: forward ? ++counts.losses : ++counts.wins; break;
    }
  }
  return counts;
}

}  // namespace

std::pair<WinRateCell, WinRateCell> compute_win_rates(
    std::span<const JudgmentRecord> judgments,
    const std::pair<std::string, std::string>& students, const std::string& judge,
    tie_policy policy) {
  TallyCounts counts = tally(judgments, students, judge);

  WinRateCell first;
  first.student = students.first;
  first.opponent = students.second;
  first.judge = judge;
  first.wins = counts.wins;
  first.ties = counts.ties;
  first.losses = counts.losses;
  first.win_rate = rate_from_counts(counts, policy);

  WinRateCell second;
  second.student = students.second;
  second.opponent = students.first;
  second.judge = judge;
  second.wins = counts.losses;
  second.ties = counts.ties;
  second.losses = counts.wins;
  // Exact complement; deriving it from the mirrored counts could differ in
  // the last bit and break the sum-to-one invariant.
  second.win_rate = 1.0 - first.win_rate;

  return {first, second};
}

// ---------------------------------------------------------------------------
// PLS
// ---------------------------------------------------------------------------

PlsCore compute_pls(double wr_ii, double wr_ij, double wr_jj, double wr_ji) {
  for (double v : {wr_ii, wr_ij, wr_jj, wr_ji})
    if (!(v >= 0.0 && v <= 1.0)) throw data_error("win rate outside [0, 1]");
  constexpr double kComplementTol = 1e-9;
  if (std::abs(wr_ii + wr_ji - 1.0) > kComplementTol ||
      std::abs(wr_jj + wr_ij - 1.0) > kComplementTol)
    throw data_error("inconsistent input: complementary win rates do not sum to 1");

  PlsCore out;
  out.avg_i = (wr_ii + wr_ij) / 2.0;
  out.avg_j = (wr_jj + wr_ji) / 2.0;
  if (out.avg_i == 0.0 || out.avg_j == 0.0)
    throw data_error("degenerate pair: AVG is zero, relative excess undefined");
  out.pls = ((wr_ii - out.avg_i) / out.avg_i + (wr_jj - out.avg_j) / out.avg_j) / 2.0;
  return out;
}

namespace {

long long count_distinct_prompts(std::span<const JudgmentRecord> recs) {
  std::set<std::string> ids;
  for (const JudgmentRecord& r : recs) ids.insert(r.prompt_id);
  return static_cast<long long>(ids.size());
}

std::vector<JudgmentRecord> filter_for(std::span<const JudgmentRecord> judgments,
                                       const std::pair<std::string, std::string>& students,
                                       const std::string& judge) {
  std::vector<JudgmentRecord> out;
  for (const JudgmentRecord& rec : judgments) {
    if (rec.judge != judge) continue;
    const bool forward = rec.model_a == students.first && rec.model_b == students.second;
    const bool reverse = rec.model_a == students.second && rec.model_b == students.first;
    if (forward || reverse) out.push_back(rec);
  }
  return out;
}

}  // namespace

PLSResult compute_pls_for_pair(std::span<const JudgmentRecord> judgments, const PairSpec& pair,
                               tie_policy policy) {
  const auto& [si, sj] = pair.students;
  const auto& [ji, jj] = pair.judges;

  std::vector<JudgmentRecord> under_ji = filter_for(judgments, pair.students, ji);
  std::vector<JudgmentRecord> under_jj = filter_for(judgments, pair.students, jj);
  if (under_ji.empty() || under_jj.empty())
    throw data_error("missing coverage for pair (" + si + ", " + sj + ") under judge " +
                     (under_ji.empty() ? ji : jj));

  auto [cell_ii, cell_ji] = compute_win_rates(under_ji, pair.students, ji, policy);
  auto [cell_ij, cell_jj] = compute_win_rates(under_jj, pair.students, jj, policy);

  PlsCore core =
      compute_pls(cell_ii.win_rate, cell_ij.win_rate, cell_jj.win_rate, cell_ji.win_rate);

  PLSResult res;
  res.student_pair = pair.students;
  res.judge_pair = pair.judges;
  res.wr_ii = cell_ii;
  res.wr_ij = cell_ij;
  res.wr_jj = cell_jj;
  res.wr_ji = cell_ji;
  res.avg_i = core.avg_i;
  res.avg_j = core.avg_j;
  res.pls = core.pls;
  std::vector<JudgmentRecord> all = under_ji;
  all.insert(all.end(), under_jj.begin(), under_jj.end());
  res.n_questions = count_distinct_prompts(all);
  return res;
}

std::vector<PLSResult> compute_pls_matrix(std::span<const JudgmentRecord> judgments,
                                          std::span<const PairSpec> pairs, tie_policy policy) {
  std::vector<PLSResult> out;
  out.reserve(pairs.size());
  for (const PairSpec& pair : pairs) out.push_back(compute_pls_for_pair(judgments, pair, policy));
  return out;
}

// ---------------------------------------------------------------------------
// Bootstrap
// ---------------------------------------------------------------------------

namespace {

struct QuestionCounts {
  TallyCounts under_ji;  // wins counted for students.first
  TallyCounts under_jj;  // wins counted for students.first
};

double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw data_error("no bootstrap statistics");
  if (sorted.size() == 1) return sorted.front();
  double pos = q * static_cast<double>(sorted.size() - 1);
  size_t lo = static_cast<size_t>(pos);
  size_t hi = std::min(lo + 1, sorted.size() - 1);
  double frac = pos - static_cast<double>(lo);
  return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

}  // namespace

std::pair<double, double> bootstrap_ci(std::span<const JudgmentRecord> judgments,
                                       const PairSpec& pair, int resamples, uint64_t seed,
                                       double level, tie_policy policy) {
  if (resamples < 100) throw data_error("bootstrap needs at least 100 resamples");
  if (!(level > 0.0 && level < 1.0)) throw data_error("bootstrap level must be in (0, 1)");

  std::map<std::string, QuestionCounts> by_question;
  for (const JudgmentRecord& rec : judgments) {
    const bool forward =
        rec.model_a == pair.students.first && rec.model_b == pair.students.second;
    const bool reverse =
        rec.model_a == pair.students.second && rec.model_b == pair.students.first;
    if (!forward && !reverse) continue;
    TallyCounts* counts = nullptr;
    if (rec.judge == pair.judges.first) counts = &by_question[rec.prompt_id].under_ji;
    else if (rec.judge == pair.judges.second) counts = &by_question[rec.prompt_id].under_jj;
    else continue;
    switch (rec.result) {
      case verdict::tie: ++counts->ties; break;
      case verdict::a: forward ? ++counts->wins : ++counts->losses; break;
      case verdict::b: forward ? ++counts->losses : ++counts->wins; break;
    }
  }
  if (by_question.size() < 2)
    throw data_error("bootstrap needs at least 2 distinct prompt_ids, have " +
                     std::to_string(by_question.size()));

  std::vector<QuestionCounts> questions;
  questions.reserve(by_question.size());
  for (auto& [_, counts] : by_question) questions.push_back(counts);
  const uint64_t n = questions.size();

  std::vector<double> stats;
  stats.reserve(static_cast<size_t>(resamples));
  for (int r = 0; r < resamples; ++r) {
    rng::Stream stream(rng::key({seed, rng::hash_str("bootstrap"), static_cast<uint64_t>(r)}));
    TallyCounts agg_ji, agg_jj;
    for (uint64_t k = 0; k < n; ++k) {
      const QuestionCounts& q = questions[stream.next_below(n)];
      agg_ji.wins += q.under_ji.wins;
      agg_ji.ties += q.under_ji.ties;
      agg_ji.losses += q.under_ji.losses;
      agg_jj.wins += q.under_jj.wins;
      agg_jj.ties += q.under_jj.ties;
      agg_jj.losses += q.under_jj.losses;
    }
    try {
      double wr_ii = rate_from_counts(agg_ji, policy);
      // agg_jj counts wins for students.first; the jj cell is its complement.
      double wr_ij = rate_from_counts(agg_jj, policy);
      double wr_jj = 1.0 - wr_ij;
      double wr_ji = 1.0 - wr_ii;
      stats.push_back(compute_pls(wr_ii, wr_ij, wr_jj, wr_ji).pls);
    } catch (const data_error&) {
      // Degenerate resample (empty cell or AVG = 0); skipped.
      continue;
    }
  }
  if (stats.empty()) throw data_error("every bootstrap resample was degenerate");

  std::sort(stats.begin(), stats.end());
  const double alpha = 1.0 - level;
  return {quantile_sorted(stats, alpha / 2.0), quantile_sorted(stats, 1.0 - alpha / 2.0)};
}

// ---------------------------------------------------------------------------
// Stability and ranking differences
// ---------------------------------------------------------------------------

std::vector<StabilityStats> aggregate_repeats(
    const std::vector<std::pair<std::string, double>>& runs, bool sample_variance) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<double>> grouped;
  for (const auto& [label, value] : runs) {
    if (!grouped.count(label)) order.push_back(label);
    grouped[label].push_back(value);
  }

  std::vector<StabilityStats> out;
  for (const std::string& label : order) {
    const std::vector<double>& values = grouped[label];
    if (values.size() < 2)
      throw data_error("label \"" + label + "\" has a single run; need at least 2");
    StabilityStats s;
    s.label = label;
    s.values = values;
    const bool all_equal =
        std::all_of(values.begin(), values.end(), [&](double v) { return v == values[0]; });
    if (all_equal) {
      // Exact: k copies of v must report mean v and variance 0, which the
      // accumulated form misses by an ulp.
      s.mean = values[0];
      s.variance = 0.0;
    } else {
      double sum = 0.0;
      for (double v : values) sum += v;
      s.mean = sum / static_cast<double>(values.size());
      double sq = 0.0;
      for (double v : values) sq += (v - s.mean) * (v - s.mean);
      const double denom = sample_variance ? static_cast<double>(values.size() - 1)
                                           : static_cast<double>(values.size());
      s.variance = sq / denom;
    }
    out.push_back(std::move(s));
  }
  return out;
}

RankingDifference ranking_difference(const LeaderboardSnapshot& human,
                                     const LeaderboardSnapshot& judged,
                                     std::span<const std::string> targets) {
  human.validate();
  judged.validate();
  if (targets.empty()) throw data_error("no target models given");
  RankingDifference out;
  double sum = 0.0;
  for (const std::string& target : targets) {
    int diff = human.rank_of(target) - judged.rank_of(target);
    out.diffs.emplace_back(target, diff);
    sum += diff;
  }
  out.mean = sum / static_cast<double>(targets.size());
  return out;
}

// ---------------------------------------------------------------------------
// Report serialization
// ---------------------------------------------------------------------------

json pls_report_json(const PLSResult& r, tie_policy policy) {
  json j{{"student_pair", json::array({r.student_pair.first, r.student_pair.second})},
         {"judge_pair", json::array({r.judge_pair.first, r.judge_pair.second})},
         {"wr",
          {{"ii", r.wr_ii}, {"ij", r.wr_ij}, {"jj", r.wr_jj}, {"ji", r.wr_ji}}},
         {"avg", {{"i", r.avg_i}, {"j", r.avg_j}}},
         {"pls", r.pls},
         {"n_questions", r.n_questions},
         {"tie_policy", to_string(policy)}};
  j["ci95"] = r.ci95 ? json::array({r.ci95->first, r.ci95->second}) : json(nullptr);
  return j;
}

PLSResult pls_result_from_report(const json& j, tie_policy* policy_out) {
  PLSResult r;
  r.student_pair = {j.at("student_pair").at(0).get<std::string>(),
                    j.at("student_pair").at(1).get<std::string>()};
  r.judge_pair = {j.at("judge_pair").at(0).get<std::string>(),
                  j.at("judge_pair").at(1).get<std::string>()};
  r.wr_ii = j.at("wr").at("ii").get<WinRateCell>();
  r.wr_ij = j.at("wr").at("ij").get<WinRateCell>();
  r.wr_jj = j.at("wr").at("jj").get<WinRateCell>();
  r.wr_ji = j.at("wr").at("ji").get<WinRateCell>();
  r.avg_i = j.at("avg").at("i").get<double>();
  r.avg_j = j.at("avg").at("j").get<double>();
  r.pls = j.at("pls").get<double>();
  r.n_questions = j.at("n_questions").get<long long>();
  if (j.contains("ci95") && !j.at("ci95").is_null())
    r.ci95 = std::make_pair(j.at("ci95").at(0).get<double>(), j.at("ci95").at(1).get<double>());
  if (policy_out) *policy_out = tie_policy_from_string(j.at("tie_policy").get<std::string>());
  return r;
}

json stability_report_json(const std::vector<StabilityStats>& stats) {
  json rows = json::array();
  for (const StabilityStats& s : stats)
    rows.push_back(json{{"label", s.label},
                        {"values", s.values},
                        {"mean", s.mean},
                        {"variance", s.variance}});
  return json{{"rows", std::move(rows)}};
}

}  // namespace leakscope::metrics
