#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "leakscope/core.hpp"
#include "leakscope/prompts.hpp"

namespace leakscope::orchestrator {

struct ProviderConfig {
  std::string base_url;     // e.g. http://127.0.0.1:8080 or https://host/v1
  std::string model;
  std::string api_key_env;  // empty: endpoint needs no credential
  double temperature = 0.0;
  int max_concurrency = 4;
  std::chrono::milliseconds timeout{30000};
  int max_retries = 3;                       // extra attempts after the first
  std::chrono::milliseconds retry_backoff{500};  // doubled per retry
  std::optional<std::filesystem::path> cache_dir;

  void validate() const;
};

// Content address of one completion request: SHA-256 over
// (base_url, model, prompt, temperature). Any field change moves the key.
std::string cache_digest(const ProviderConfig& provider, const std::string& prompt);

struct ChatOptions {
  bool bypass_cache = false;
};

// One chat completion. Consults the cache before the network, retries
// transient failures with exponential backoff, and writes the cache (atomic
// temp-file rename) on success. Throws provider_error with a distinct code
// for authentication, timeout, and retry exhaustion.
std::string chat(const ProviderConfig& provider, const std::string& prompt,
                 const ChatOptions& opts = {});

// ---------------------------------------------------------------------------
// Verdict parsing
// ---------------------------------------------------------------------------

// Parsing order: (1) a JSON object (whole string, or the outermost {...}
// span) with a "prefered answer"/"preferred answer"/"judgment" field; a field
// that contains several different labels is a hard error, since the JSON was
// supposed to disambiguate. (2) Otherwise the last occurrence of a bracketed
// label anywhere in the text wins. No label at all is an error.
verdict parse_verdict(const std::string& raw, const prompts::VerdictLabels& labels);

// Maps a presented-position verdict back to canonical model identities: in
// the swapped order an "A" verdict is a win for model_b.
verdict canonical_verdict(verdict presented, int order_index);

// ---------------------------------------------------------------------------
// Pairwise judging
// ---------------------------------------------------------------------------

struct InvalidJudgment {
  std::string prompt_id;
  int order_index = 0;
  std::string raw;
  std::string reason;
};

struct JudgePairOutcome {
  std::vector<JudgmentRecord> records;
  std::vector<InvalidJudgment> invalid;
};

// Renders the pairwise judgment prompt for the canonical order and, when
// swap is on, the reversed order, calling chat() once per order. Verdicts
// are stored against canonical identities.
JudgePairOutcome judge_pair(const ProviderConfig& judge, const PromptItem& question,
                            const ResponseRecord& resp_a, const ResponseRecord& resp_b,
                            bool swap, const prompts::Registry& registry,
                            const prompts::VerdictLabels& labels,
                            const std::string& judge_id = {});

struct RunOptions {
  bool swap = true;
  bool allow_partial = false;
  std::string judge_id;  // defaults to provider.model
  prompts::VerdictLabels labels = prompts::verdict_labels();
};

struct RunStats {
  size_t questions = 0;
  size_t records = 0;
  size_t invalid = 0;
};

// Judges every question over the two response sets and writes one
// judgments.jsonl with records sorted by (prompt_id, order_index), so the
// artifact is byte-stable no matter how completions interleave. Re-runs hit
// the response cache and only request what is missing.
RunStats run_benchmark_judgments(std::span<const PromptItem> questions,
                                 std::span<const ResponseRecord> responses_a,
                                 std::span<const ResponseRecord> responses_b,
                                 const ProviderConfig& judge, const RunOptions& options,
                                 const std::filesystem::path& out_path,
                                 const prompts::Registry& registry);

// Shared bounded-parallelism helper: runs fn(0..n) on at most max_concurrency
// worker threads; the first exception aborts remaining work and is rethrown.
void parallel_for(size_t n, int max_concurrency, const std::function<void(size_t)>& fn);

}  // namespace leakscope::orchestrator
