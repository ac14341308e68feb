#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "leakscope/core.hpp"
#include "leakscope/metrics.hpp"

namespace leakscope::sim {

// Closed-world generator -> student -> judge ecosystem with a known injected
// style bias. Judge k scores a response as q + b*m where m is the student's
// affinity to judge k's fingerprint (alpha when the student was trained on
// that judge's related generator, 0 otherwise). With equal intrinsic quality
// and logistic noise at temperature tau, the related student wins with
// probability sigma(alpha*b/tau), giving the closed-form
// PLS* = tanh(alpha*b / (2*tau)) used to validate the estimator.
struct SimConfig {
  double bias = 0.0;          // b >= 0
  double tau = 1.0;           // > 0
  double mix_fraction = 1.0;  // alpha in [0, 1], fingerprint strength
  long long n_questions = 1000;
  uint64_t seed = 0;
  // category -> bias multiplier; empty means one implicit category with
  // multiplier 1. Questions draw a category uniformly (seeded).
  std::map<std::string, double> category_bias;
  bool unrelated_judges = false;  // judge pair with no fingerprint match

  void validate() const;
};

void to_json(json& j, const SimConfig& c);

// Fixed ecosystem identities.
inline constexpr const char* kStudentA = "student-a";
inline constexpr const char* kStudentB = "student-b";
inline constexpr const char* kJudgeA = "judge-a";    // related to student-a
inline constexpr const char* kJudgeB = "judge-b";    // related to student-b
inline constexpr const char* kJudgeC = "judge-c";    // unrelated pair
inline constexpr const char* kJudgeD = "judge-d";

std::pair<std::string, std::string> judge_pair_ids(const SimConfig& config);

std::string question_id(long long index);
// Category of question `index` under this config; nullopt without categories.
std::optional<std::string> question_category(const SimConfig& config, long long index);

// Fingerprint affinity of a student under a judge: alpha or 0.
double fingerprint_affinity(const SimConfig& config, const std::string& judge,
                            const std::string& student);

// P(first-presented response wins) for question `qid` under `judge`.
double first_wins_probability(const SimConfig& config, const std::string& qid,
                              const std::string& judge, const std::string& first,
                              const std::string& second);

// One Bernoulli verdict draw in presented terms (a = first-presented wins).
// Keyed by (seed, qid, judge, order), so the direct generator and the mock
// provider produce identical verdicts for the same comparison.
verdict sim_verdict(const SimConfig& config, const std::string& qid, const std::string& judge,
                    const std::string& first, const std::string& second, int order_index);

// The Appendix-style JSON completion the simulated judge emits.
std::string sim_completion(verdict presented);

// ---------------------------------------------------------------------------
// Dataset materialization (for driving the real orchestrator)
// ---------------------------------------------------------------------------

std::vector<PromptItem> make_questions(const SimConfig& config);
std::vector<ResponseRecord> make_responses(const SimConfig& config, const std::string& student);

// ---------------------------------------------------------------------------
// Direct experiment path
// ---------------------------------------------------------------------------

// Both presentation orders under both judges for every question, with
// verdicts mapped back to canonical identities.
std::vector<JudgmentRecord> generate_judgments(const SimConfig& config);

// Expected PLS under the verdict model (category multipliers averaged with
// uniform weights).
double oracle_pls(const SimConfig& config);
std::map<std::string, double> oracle_pls_by_category(const SimConfig& config);

struct SimOutcome {
  std::vector<PromptItem> questions;
  std::vector<JudgmentRecord> judgments;
  PLSResult pls;
  double oracle = 0.0;
  std::map<std::string, double> oracle_by_category;
};

// Generates verdicts and feeds them through the real metrics module. When
// bootstrap_resamples > 0 the result carries a percentile ci95.
SimOutcome run_leakage_experiment(const SimConfig& config, int bootstrap_resamples = 0);

json sim_report_json(const SimConfig& config, const SimOutcome& outcome);

// ---------------------------------------------------------------------------
// Mock provider (chat-completion wire format test double)
// ---------------------------------------------------------------------------

enum class mock_behavior { always_a, echo_truth, scripted, sim_judge };

struct MockOptions {
  mock_behavior behavior = mock_behavior::always_a;
  // scripted: one entry per request, "fail" -> HTTP 500; the last entry
  // repeats once the script is exhausted.
  std::vector<std::string> script;
  SimConfig sim;             // for sim_judge
  int response_delay_ms = 0; // lets tests observe the in-flight bound
};

// Local HTTP server speaking POST /chat/completions. Counts requests and
// tracks the maximum number of simultaneously in-flight requests.
class MockProvider {
 public:
  explicit MockProvider(MockOptions options);
  ~MockProvider();
  MockProvider(const MockProvider&) = delete;
  MockProvider& operator=(const MockProvider&) = delete;

  int port() const { return port_; }
  std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port_); }

  int request_count() const { return requests_.load(); }
  int max_in_flight() const { return max_in_flight_.load(); }
  void reset_counters();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int port_ = 0;
  std::atomic<int> requests_{0};
  std::atomic<int> in_flight_{0};
  std::atomic<int> max_in_flight_{0};
  std::atomic<size_t> script_pos_{0};
};

}  // namespace leakscope::sim
