#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "leakscope/errors.hpp"

namespace leakscope {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Model identities
// ---------------------------------------------------------------------------

enum class model_role { generator, student, judge };

std::string to_string(model_role role);
model_role model_role_from_string(const std::string& s);

struct ModelRef {
  std::string id;
  model_role role = model_role::student;
  std::optional<std::string> family;
  std::optional<std::string> series;
};

void to_json(json& j, const ModelRef& m);
void from_json(const json& j, ModelRef& m);

// Loads {"models": [...]} and enforces non-empty, unique ids.
std::vector<ModelRef> load_model_manifest(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Relatedness between data generator and judge
// ---------------------------------------------------------------------------

enum class relatedness_kind { same_model, inheritance, same_family, unrelated };
enum class inheritance_direction { generator_from_judge, judge_from_generator };
enum class instruction_reuse { same_instructions, different_instructions };
enum class series_match { same_series, different_series };

std::string to_string(relatedness_kind v);
std::string to_string(inheritance_direction v);
std::string to_string(instruction_reuse v);
std::string to_string(series_match v);
relatedness_kind relatedness_kind_from_string(const std::string& s);

struct RelatednessSpec {
  relatedness_kind kind = relatedness_kind::unrelated;
  std::optional<inheritance_direction> direction;
  std::optional<instruction_reuse> instructions;
  std::optional<series_match> series;

  // Sub-options are present iff the kind calls for them; throws data_error.
  void validate() const;
};

void to_json(json& j, const RelatednessSpec& r);
void from_json(const json& j, RelatednessSpec& r);

// ---------------------------------------------------------------------------
// Line-delimited record types (prompts.jsonl / responses.jsonl /
// judgments.jsonl). Unknown fields survive a parse -> serialize round trip.
// ---------------------------------------------------------------------------

struct PromptItem {
  std::string id;
  std::string text;
  std::optional<std::string> question_type;
  json extra = json::object();
};

struct ResponseRecord {
  std::string prompt_id;
  std::string model;
  std::string text;
  json extra = json::object();
};

enum class verdict { a, b, tie };

std::string to_string(verdict v);
verdict verdict_from_string(const std::string& s);

struct JudgmentRecord {
  std::string prompt_id;
  std::string judge;
  // Canonical pair identities; verdict "a" always means model_a won, no
  // matter how the pair was presented.
  std::string model_a;
  std::string model_b;
  int order_index = 0;  // 0 = canonical presentation, 1 = positions swapped
  verdict result = verdict::tie;
  std::string rationale;
  std::string raw;
  json extra = json::object();
};

// Stable identifier for one judgment record, used by the judgment-dimension
// category analysis to attach labels to individual rationales.
std::string judgment_key(const JudgmentRecord& rec);

void to_json(json& j, const PromptItem& p);
void from_json(const json& j, PromptItem& p);
void to_json(json& j, const ResponseRecord& r);
void from_json(const json& j, ResponseRecord& r);
void to_json(json& j, const JudgmentRecord& r);
void from_json(const json& j, JudgmentRecord& r);

// ---------------------------------------------------------------------------
// Aggregates
// ---------------------------------------------------------------------------

struct WinRateCell {
  std::string student;
  std::string opponent;
  std::string judge;
  long long wins = 0;
  long long ties = 0;
  long long losses = 0;
  double win_rate = 0.0;
};

void to_json(json& j, const WinRateCell& c);
void from_json(const json& j, WinRateCell& c);

struct PLSResult {
  std::pair<std::string, std::string> student_pair;
  std::pair<std::string, std::string> judge_pair;
  WinRateCell wr_ii;  // student i under its related judge
  WinRateCell wr_ij;  // student i under the other judge
  WinRateCell wr_jj;
  WinRateCell wr_ji;
  double avg_i = 0.0;
  double avg_j = 0.0;
  double pls = 0.0;
  std::optional<std::pair<double, double>> ci95;
  long long n_questions = 0;
};

// ---------------------------------------------------------------------------
// Mixture manifests (data-mixing experiment plans)
// ---------------------------------------------------------------------------

enum class filler_kind { manual, multi_source_synthetic };
enum class item_origin { synthetic, filler };

std::string to_string(filler_kind v);
std::string to_string(item_origin v);
filler_kind filler_kind_from_string(const std::string& s);

struct MixItem {
  std::string prompt_id;
  item_origin origin = item_origin::filler;
};

struct MixManifest {
  long long total = 0;
  double synthetic_fraction = 0.0;
  std::string synthetic_source;
  filler_kind filler = filler_kind::manual;
  int64_t seed = 0;
  std::vector<MixItem> items;
};

void to_json(json& j, const MixManifest& m);
void from_json(const json& j, MixManifest& m);

// ---------------------------------------------------------------------------
// Category vocabularies (question types and judgment dimensions)
// ---------------------------------------------------------------------------

const std::vector<std::string>& question_type_labels();      // 7 entries
const std::vector<std::string>& judgment_dimension_labels();  // 9 entries

// ---------------------------------------------------------------------------
// JSONL I/O
// ---------------------------------------------------------------------------

namespace detail {
json parse_line(const std::string& line, const std::filesystem::path& path, size_t lineno);
}

template <typename T>
std::vector<T> read_jsonl(const std::filesystem::path& path) {
  std::vector<T> out;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot open " + path.string());
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    out.push_back(detail::parse_line(line, path, lineno).get<T>());
  }
  return out;
}

template <typename T>
void write_jsonl(const std::filesystem::path& path, const std::vector<T>& records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw data_error("cannot write " + path.string());
  for (const T& rec : records) {
    json j = rec;
    out << j.dump() << '\n';
  }
  if (!out) throw data_error("short write to " + path.string());
}

void write_json_file(const std::filesystem::path& path, const json& j);
json read_json_file(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Dataset validation
// ---------------------------------------------------------------------------

enum class dataset_schema { prompts, responses, judgments };

dataset_schema dataset_schema_from_string(const std::string& s);

struct Violation {
  size_t line = 0;  // 0 when not tied to a single line
  std::string message;
};

struct ValidationReport {
  size_t records = 0;
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
};

// Scans a line-delimited file against the named schema. Malformed lines are
// reported as violations; with strict=true the first malformed line throws.
// When a model manifest is given, judgment identifiers must resolve in it.
ValidationReport validate_dataset(const std::filesystem::path& path, dataset_schema schema,
                                  bool strict = false,
                                  const std::vector<ModelRef>* manifest = nullptr);

}  // namespace leakscope
