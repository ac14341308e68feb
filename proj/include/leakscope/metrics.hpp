#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "leakscope/core.hpp"

namespace leakscope::metrics {

// How ties enter a win rate. Half credit keeps the complement of a cell pair
// exactly 1; exclude drops tied comparisons from the denominator.
enum class tie_policy { half_credit, exclude };

std::string to_string(tie_policy p);
tie_policy tie_policy_from_string(const std::string& s);

struct LeaderboardSnapshot {
  std::string name;
  std::vector<std::string> ranking;  // rank 1 first

  void validate() const;  // no duplicate ids
  // 1-based rank, or throws data_error when absent.
  int rank_of(const std::string& id) const;
};

struct StabilityStats {
  std::string label;
  std::vector<double> values;
  double mean = 0.0;
  double variance = 0.0;
};

// ---------------------------------------------------------------------------
// Win rates (Eq. 5 aggregation)
// ---------------------------------------------------------------------------

// Aggregates every judgment of `judge` over the unordered student pair into
// the two complementary cells. Verdicts are canonical (order already mapped
// back), so an "a" verdict is a win for model_a regardless of order_index.
// The first cell's rate comes from its counts; the second is constructed as
// the exact complement so the two always sum to 1.0 bit-for-bit.
std::pair<WinRateCell, WinRateCell> compute_win_rates(
    std::span<const JudgmentRecord> judgments,
    const std::pair<std::string, std::string>& students, const std::string& judge,
    tie_policy policy = tie_policy::half_credit);

// ---------------------------------------------------------------------------
// Preference Leakage Score (Eq. 4)
// ---------------------------------------------------------------------------

struct PlsCore {
  double avg_i = 0.0;
  double avg_j = 0.0;
  double pls = 0.0;
};

// wr_ii: student i under its related judge; wr_ij: student i under the other
// judge; likewise for j. Inputs must satisfy wr_ii + wr_ji = 1 and
// wr_jj + wr_ij = 1 within 1e-9.
PlsCore compute_pls(double wr_ii, double wr_ij, double wr_jj, double wr_ji);

struct PairSpec {
  std::pair<std::string, std::string> students;
  std::pair<std::string, std::string> judges;  // judges.first related to students.first
};

std::vector<PLSResult> compute_pls_matrix(std::span<const JudgmentRecord> judgments,
                                          std::span<const PairSpec> pairs,
                                          tie_policy policy = tie_policy::half_credit);

// Single-pair convenience wrapper.
PLSResult compute_pls_for_pair(std::span<const JudgmentRecord> judgments, const PairSpec& pair,
                               tie_policy policy = tie_policy::half_credit);

// ---------------------------------------------------------------------------
// Bootstrap confidence interval
// ---------------------------------------------------------------------------

// Percentile bootstrap over questions: the resampling unit is the prompt_id,
// so both presentation orders of a question travel together. Deterministic
// for a fixed seed; each resample draws from its own counter-based stream,
// so evaluation order (or parallelism) cannot perturb the interval.
std::pair<double, double> bootstrap_ci(std::span<const JudgmentRecord> judgments,
                                       const PairSpec& pair, int resamples, uint64_t seed,
                                       double level = 0.95,
                                       tie_policy policy = tie_policy::half_credit);

// ---------------------------------------------------------------------------
// Repeat-run stability and leaderboard ranking differences
// ---------------------------------------------------------------------------

// Groups (label, pls) runs by label; each label needs >= 2 runs. Population
// variance by default, sample variance on request.
std::vector<StabilityStats> aggregate_repeats(
    const std::vector<std::pair<std::string, double>>& runs, bool sample_variance = false);

struct RankingDifference {
  std::vector<std::pair<std::string, int>> diffs;  // target -> human rank - judged rank
  double mean = 0.0;
};

// Positive diff: the judged leaderboard places the target higher (better)
// than the human one.
RankingDifference ranking_difference(const LeaderboardSnapshot& human,
                                     const LeaderboardSnapshot& judged,
                                     std::span<const std::string> targets);

// ---------------------------------------------------------------------------
// Report serialization (pls_report.json / stability_report.json)
// ---------------------------------------------------------------------------

json pls_report_json(const PLSResult& result, tie_policy policy);
PLSResult pls_result_from_report(const json& j, tie_policy* policy_out = nullptr);

json stability_report_json(const std::vector<StabilityStats>& stats);

}  // namespace leakscope::metrics
