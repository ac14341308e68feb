#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "leakscope/core.hpp"
#include "leakscope/metrics.hpp"
#include "leakscope/orchestrator.hpp"

namespace leakscope::analyses {

// ---------------------------------------------------------------------------
// Recognition probes: can a judge spot its related student's output?
// ---------------------------------------------------------------------------

enum class recognition_mode { pointwise, pairwise };

std::string to_string(recognition_mode m);
recognition_mode recognition_mode_from_string(const std::string& s);

struct RecognitionItem {
  std::string prompt_id;
  std::string instruction;
  std::string response;                  // pointwise probe, or pairwise response 1
  std::optional<std::string> response2;  // pairwise response 2
  std::string truth;                     // pointwise: yes|no; pairwise: 1|2
};

struct RecognitionRecord {
  std::string prompt_id;
  recognition_mode mode = recognition_mode::pointwise;
  std::string truth;
  std::optional<std::string> prediction;  // nullopt: unparseable, kept not dropped
  json extra = json::object();
};

void to_json(json& j, const RecognitionRecord& r);
void from_json(const json& j, RecognitionRecord& r);

// Balanced probe sets (the construction is a toolkit default; seeded).
// Pointwise: exactly half the items probe the related student's response.
// Pairwise: the related student's response takes a random position.
std::vector<RecognitionItem> build_pointwise_items(std::span<const PromptItem> questions,
                                                   std::span<const ResponseRecord> related,
                                                   std::span<const ResponseRecord> unrelated,
                                                   uint64_t seed);
std::vector<RecognitionItem> build_pairwise_items(std::span<const PromptItem> questions,
                                                  std::span<const ResponseRecord> related,
                                                  std::span<const ResponseRecord> unrelated,
                                                  uint64_t seed);

std::vector<RecognitionRecord> run_recognition_probe(const orchestrator::ProviderConfig& judge,
                                                     recognition_mode mode,
                                                     std::span<const RecognitionItem> items,
                                                     const prompts::Registry& registry);

struct RecognitionScore {
  long long total = 0;
  long long valid = 0;
  long long correct = 0;
  long long incorrect = 0;
  long long invalid = 0;
  double accuracy = 0.0;         // correct / valid
  double chance_baseline = 0.0;  // max truth-class frequency
  std::map<std::string, long long> truth_counts;
};

// Works for the probe label domains and equally for externally supplied
// prediction files (e.g. a three-class response classifier's output).
RecognitionScore score_recognition(std::span<const RecognitionRecord> records);

json recognition_score_json(const RecognitionScore& s);

// ---------------------------------------------------------------------------
// Category analyses: question types and judgment dimensions
// ---------------------------------------------------------------------------

enum class category_scheme { question_type, judgment_dimension };

std::string to_string(category_scheme s);
category_scheme category_scheme_from_string(const std::string& s);

const std::vector<std::string>& scheme_labels(category_scheme s);

struct CategoryAssignment {
  std::string subject_id;  // prompt id, or judgment_key() for dimensions
  category_scheme scheme = category_scheme::question_type;
  std::vector<std::string> labels;  // non-empty; single label for question_type
  json extra = json::object();
};

void to_json(json& j, const CategoryAssignment& a);
void from_json(const json& j, CategoryAssignment& a);

struct Subject {
  std::string id;
  std::string text;  // the question, or the judge's rationale
};

struct CategorizeOutcome {
  std::vector<CategoryAssignment> assignments;
  std::vector<std::string> warnings;  // out-of-scheme labels mapped to Others
};

// One assignment per subject. Unparseable model output is retried once with
// the cache bypassed, then raises data_error. Labels outside the scheme fall
// back to "Others" with a warning.
CategorizeOutcome categorize(const orchestrator::ProviderConfig& judge, category_scheme scheme,
                             std::span<const Subject> subjects,
                             const prompts::Registry& registry);

struct CategoryPlsEntry {
  long long n_questions = 0;
  bool sufficient = false;
  std::optional<PLSResult> result;  // set iff sufficient
};

// PLS per label over the judgments carrying that label. Question-type labels
// attach via prompt_id, dimension labels via judgment_key(); a multi-label
// judgment contributes to every label it carries. Labels with fewer than
// min_n distinct questions are reported as insufficient data.
std::map<std::string, CategoryPlsEntry> per_category_pls(
    std::span<const JudgmentRecord> judgments, std::span<const CategoryAssignment> assignments,
    const metrics::PairSpec& pair, int min_n = 20,
    metrics::tie_policy policy = metrics::tie_policy::half_credit);

json category_pls_report_json(const std::map<std::string, CategoryPlsEntry>& per_label,
                              category_scheme scheme, int min_n, metrics::tie_policy policy);

}  // namespace leakscope::analyses
