#include "leakscope/core.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

namespace leakscope {

namespace {

// Pulls a required string field, or throws with the field name.
std::string want_string(const json& j, const char* field) {
  auto it = j.find(field);
  if (it == j.end() || !it->is_string())
    throw data_error(std::string("missing or non-string field \"") + field + "\"");
  return it->get<std::string>();
}

// Removes the known keys from a copy of the object; what is left is the
// record's unknown-field payload, carried through round trips.
json strip_known(const json& j, std::initializer_list<const char*> known) {
  json extra = j;
  for (const char* k : known) extra.erase(k);
  if (!extra.is_object()) extra = json::object();
  return extra;
}

void merge_extra(json& j, const json& extra) {
  for (auto it = extra.begin(); it != extra.end(); ++it) {
    if (!j.contains(it.key())) j[it.key()] = it.value();
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// enums
// ---------------------------------------------------------------------------

std::string to_string(model_role role) {
  switch (role) {
    case model_role::generator: return "generator";
    case model_role::student: return "student";
    case model_role::judge: return "judge";
  }
  return "?";
}

model_role model_role_from_string(const std::string& s) {
  if (s == "generator") return model_role::generator;
  if (s == "student") return model_role::student;
  if (s == "judge") return model_role::judge;
  throw data_error("unknown model role \"" + s + "\"");
}

std::string to_string(relatedness_kind v) {
  switch (v) {
    case relatedness_kind::same_model: return "same_model";
    case relatedness_kind::inheritance: return "inheritance";
    case relatedness_kind::same_family: return "same_family";
    case relatedness_kind::unrelated: return "unrelated";
  }
  return "?";
}

relatedness_kind relatedness_kind_from_string(const std::string& s) {
  if (s == "same_model") return relatedness_kind::same_model;
  if (s == "inheritance") return relatedness_kind::inheritance;
  if (s == "same_family") return relatedness_kind::same_family;
  if (s == "unrelated") return relatedness_kind::unrelated;
  throw data_error("unknown relatedness kind \"" + s + "\"");
}

std::string to_string(inheritance_direction v) {
  return v == inheritance_direction::generator_from_judge ? "generator_from_judge"
                                                          : "judge_from_generator";
}

std::string to_string(instruction_reuse v) {
  return v == instruction_reuse::same_instructions ? "same_instructions"
                                                   : "different_instructions";
}

std::string to_string(series_match v) {
  return v == series_match::same_series ? "same_series" : "different_series";
}

std::string to_string(verdict v) {
  switch (v) {
    case verdict::a: return "A";
    case verdict::b: return "B";
    case verdict::tie: return "tie";
  }
  return "?";
}

verdict verdict_from_string(const std::string& s) {
  if (s == "A") return verdict::a;
  if (s == "B") return verdict::b;
  if (s == "tie") return verdict::tie;
  throw data_error("unknown verdict \"" + s + "\"");
}

std::string to_string(filler_kind v) {
  return v == filler_kind::manual ? "manual" : "multi_source_synthetic";
}

filler_kind filler_kind_from_string(const std::string& s) {
  if (s == "manual") return filler_kind::manual;
  if (s == "multi_source_synthetic") return filler_kind::multi_source_synthetic;
  throw data_error("unknown filler kind \"" + s + "\"");
}

std::string to_string(item_origin v) {
  return v == item_origin::synthetic ? "synthetic" : "filler";
}

// ---------------------------------------------------------------------------
// ModelRef
// ---------------------------------------------------------------------------

void to_json(json& j, const ModelRef& m) {
  j = json{{"id", m.id}, {"role", to_string(m.role)}};
  if (m.family) j["family"] = *m.family;
  if (m.series) j["series"] = *m.series;
}

void from_json(const json& j, ModelRef& m) {
  m.id = want_string(j, "id");
  m.role = model_role_from_string(want_string(j, "role"));
  m.family.reset();
  m.series.reset();
  if (j.contains("family")) m.family = j.at("family").get<std::string>();
  if (j.contains("series")) m.series = j.at("series").get<std::string>();
  if (m.id.empty()) throw data_error("model id must be non-empty");
}

std::vector<ModelRef> load_model_manifest(const std::filesystem::path& path) {
  json j = read_json_file(path);
  if (!j.is_object() || !j.contains("models") || !j["models"].is_array())
    throw data_error("model manifest must be an object with a \"models\" array: " + path.string());
  std::vector<ModelRef> models = j["models"].get<std::vector<ModelRef>>();
  std::set<std::string> seen;
  for (const ModelRef& m : models) {
    if (!seen.insert(m.id).second)
      throw data_error("duplicate model id \"" + m.id + "\" in manifest " + path.string());
  }
  return models;
}

// ---------------------------------------------------------------------------
// RelatednessSpec
// ---------------------------------------------------------------------------

void RelatednessSpec::validate() const {
  const bool inh = kind == relatedness_kind::inheritance;
  const bool fam = kind == relatedness_kind::same_family;
  if (inh != direction.has_value())
    throw data_error("inheritance_direction is required exactly for kind=inheritance");
  if (inh != instructions.has_value())
    throw data_error("instruction_reuse is required exactly for kind=inheritance");
  if (fam != series.has_value())
    throw data_error("series_match is required exactly for kind=same_family");
}

void to_json(json& j, const RelatednessSpec& r) {
  j = json{{"kind", to_string(r.kind)}};
  if (r.direction) j["inheritance_direction"] = to_string(*r.direction);
  if (r.instructions) j["instruction_reuse"] = to_string(*r.instructions);
  if (r.series) j["series_match"] = to_string(*r.series);
}

void from_json(const json& j, RelatednessSpec& r) {
  r = RelatednessSpec{};
  r.kind = relatedness_kind_from_string(want_string(j, "kind"));
  if (j.contains("inheritance_direction")) {
    std::string v = j.at("inheritance_direction").get<std::string>();
    if (v == "generator_from_judge") r.direction = inheritance_direction::generator_from_judge;
    else if (v == "judge_from_generator") r.direction = inheritance_direction::judge_from_generator;
    else throw data_error("unknown inheritance_direction \"" + v + "\"");
  }
  if (j.contains("instruction_reuse")) {
    std::string v = j.at("instruction_reuse").get<std::string>();
    if (v == "same_instructions") r.instructions = instruction_reuse::same_instructions;
    else if (v == "different_instructions") r.instructions = instruction_reuse::different_instructions;
    else throw data_error("unknown instruction_reuse \"" + v + "\"");
  }
  if (j.contains("series_match")) {
    std::string v = j.at("series_match").get<std::string>();
    if (v == "same_series") r.series = series_match::same_series;
    else if (v == "different_series") r.series = series_match::different_series;
    else throw data_error("unknown series_match \"" + v + "\"");
  }
  r.validate();
}

// ---------------------------------------------------------------------------
// Record serialization
// ---------------------------------------------------------------------------

void to_json(json& j, const PromptItem& p) {
  j = json{{"id", p.id}, {"text", p.text}};
  if (p.question_type) j["question_type"] = *p.question_type;
  merge_extra(j, p.extra);
}

void from_json(const json& j, PromptItem& p) {
  p.id = want_string(j, "id");
  p.text = want_string(j, "text");
  p.question_type.reset();
  if (j.contains("question_type")) p.question_type = j.at("question_type").get<std::string>();
  p.extra = strip_known(j, {"id", "text", "question_type"});
}

void to_json(json& j, const ResponseRecord& r) {
  j = json{{"prompt_id", r.prompt_id}, {"model", r.model}, {"text", r.text}};
  merge_extra(j, r.extra);
}

void from_json(const json& j, ResponseRecord& r) {
  r.prompt_id = want_string(j, "prompt_id");
  r.model = want_string(j, "model");
  r.text = want_string(j, "text");
  r.extra = strip_known(j, {"prompt_id", "model", "text"});
}

void to_json(json& j, const JudgmentRecord& r) {
  j = json{{"prompt_id", r.prompt_id}, {"judge", r.judge},     {"model_a", r.model_a},
           {"model_b", r.model_b},     {"order_index", r.order_index},
           {"verdict", to_string(r.result)}, {"rationale", r.rationale}, {"raw", r.raw}};
  merge_extra(j, r.extra);
}

void from_json(const json& j, JudgmentRecord& r) {
  r.prompt_id = want_string(j, "prompt_id");
  r.judge = want_string(j, "judge");
  r.model_a = want_string(j, "model_a");
  r.model_b = want_string(j, "model_b");
  if (!j.contains("order_index") || !j.at("order_index").is_number_integer())
    throw data_error("missing or non-integer field \"order_index\"");
  r.order_index = j.at("order_index").get<int>();
  r.result = verdict_from_string(want_string(j, "verdict"));
  r.rationale = j.value("rationale", std::string());
  r.raw = j.value("raw", std::string());
  r.extra = strip_known(j, {"prompt_id", "judge", "model_a", "model_b", "order_index", "verdict",
                            "rationale", "raw"});
}

std::string judgment_key(const JudgmentRecord& rec) {
  std::ostringstream os;
  os << rec.prompt_id << '/' << rec.judge << '/' << rec.model_a << '/' << rec.model_b << '/'
     << rec.order_index;
  return os.str();
}

void to_json(json& j, const WinRateCell& c) {
  j = json{{"student", c.student}, {"opponent", c.opponent}, {"judge", c.judge},
           {"wins", c.wins},       {"ties", c.ties},         {"losses", c.losses},
           {"win_rate", c.win_rate}};
}

void from_json(const json& j, WinRateCell& c) {
  c.student = want_string(j, "student");
  c.opponent = want_string(j, "opponent");
  c.judge = want_string(j, "judge");
  c.wins = j.at("wins").get<long long>();
  c.ties = j.at("ties").get<long long>();
  c.losses = j.at("losses").get<long long>();
  c.win_rate = j.at("win_rate").get<double>();
}

void to_json(json& j, const MixManifest& m) {
  json items = json::array();
  for (const MixItem& it : m.items)
    items.push_back(json{{"prompt_id", it.prompt_id}, {"origin", to_string(it.origin)}});
  j = json{{"total", m.total},
           {"synthetic_fraction", m.synthetic_fraction},
           {"synthetic_source", m.synthetic_source},
           {"filler_kind", to_string(m.filler)},
           {"seed", m.seed},
           {"items", std::move(items)}};
}

void from_json(const json& j, MixManifest& m) {
  m.total = j.at("total").get<long long>();
  m.synthetic_fraction = j.at("synthetic_fraction").get<double>();
  m.synthetic_source = want_string(j, "synthetic_source");
  m.filler = filler_kind_from_string(want_string(j, "filler_kind"));
  m.seed = j.at("seed").get<int64_t>();
  m.items.clear();
  for (const json& it : j.at("items")) {
    MixItem item;
    item.prompt_id = want_string(it, "prompt_id");
    std::string origin = want_string(it, "origin");
    if (origin == "synthetic") item.origin = item_origin::synthetic;
    else if (origin == "filler") item.origin = item_origin::filler;
    else throw data_error("unknown item origin \"" + origin + "\"");
    m.items.push_back(std::move(item));
  }
}

// ---------------------------------------------------------------------------
// Category vocabularies
// ---------------------------------------------------------------------------

const std::vector<std::string>& question_type_labels() {
  static const std::vector<std::string> labels = {
      "Computer Science & Programming",
      "Mathematics & Statistics",
      "Science & Engineering",
      "Business & Finance",
      "Writing & Communication",
      "Social & Daily Life",
      "Others",
  };
  return labels;
}

const std::vector<std::string>& judgment_dimension_labels() {
  static const std::vector<std::string> labels = {
      "Factuality",
      "User Satisfaction",
      "Logical Coherence",
      "Richness",
      "Creativity",
      "Fairness and Responsibility",
      "Completeness",
      "Clarity",
      "Others",
  };
  return labels;
}

// ---------------------------------------------------------------------------
// JSON file helpers
// ---------------------------------------------------------------------------

namespace detail {
json parse_line(const std::string& line, const std::filesystem::path& path, size_t lineno) {
  json j = json::parse(line, nullptr, false);
  if (j.is_discarded())
    throw data_error(path.string() + ":" + std::to_string(lineno) + ": malformed JSON line");
  return j;
}
}  // namespace detail

void write_json_file(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw data_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw data_error("short write to " + path.string());
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot open " + path.string());
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw data_error("malformed JSON in " + path.string());
  return j;
}

// ---------------------------------------------------------------------------
// Dataset validation
// ---------------------------------------------------------------------------

dataset_schema dataset_schema_from_string(const std::string& s) {
  if (s == "prompts") return dataset_schema::prompts;
  if (s == "responses") return dataset_schema::responses;
  if (s == "judgments") return dataset_schema::judgments;
  throw usage_error("unknown schema \"" + s + "\" (expected prompts|responses|judgments)");
}

namespace {

struct LineScanner {
  const std::filesystem::path& path;
  bool strict;
  ValidationReport& report;

  // Returns parsed JSON or nullopt after recording/raising the violation.
  std::optional<json> parse(const std::string& line, size_t lineno) {
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      if (strict)
        throw data_error(path.string() + ":" + std::to_string(lineno) + ": malformed JSON line");
      report.violations.push_back({lineno, "malformed JSON line"});
      return std::nullopt;
    }
    return j;
  }
};

void validate_prompts(const json& j, size_t lineno, ValidationReport& rep,
                      std::map<std::string, size_t>& seen_ids) {
  PromptItem p;
  try {
    p = j.get<PromptItem>();
  } catch (const std::exception& e) {
    rep.violations.push_back({lineno, e.what()});
    return;
  }
  if (p.id.empty()) rep.violations.push_back({lineno, "empty prompt id"});
  if (p.text.empty()) rep.violations.push_back({lineno, "empty prompt text"});
  if (p.question_type) {
    const auto& labels = question_type_labels();
    if (std::find(labels.begin(), labels.end(), *p.question_type) == labels.end())
      rep.violations.push_back({lineno, "unknown question_type \"" + *p.question_type + "\""});
  }
  auto [it, inserted] = seen_ids.emplace(p.id, lineno);
  if (!inserted)
    rep.violations.push_back(
        {lineno, "duplicate prompt id \"" + p.id + "\" (first seen at line " +
                     std::to_string(it->second) + ")"});
}

void validate_responses(const json& j, size_t lineno, ValidationReport& rep,
                        std::map<std::pair<std::string, std::string>, size_t>& seen_keys) {
  ResponseRecord r;
  try {
    r = j.get<ResponseRecord>();
  } catch (const std::exception& e) {
    rep.violations.push_back({lineno, e.what()});
    return;
  }
  if (r.prompt_id.empty()) rep.violations.push_back({lineno, "empty prompt_id"});
  if (r.model.empty()) rep.violations.push_back({lineno, "empty model"});
  auto [it, inserted] = seen_keys.emplace(std::make_pair(r.prompt_id, r.model), lineno);
  if (!inserted)
    rep.violations.push_back(
        {lineno, "duplicate (prompt_id, model) = (\"" + r.prompt_id + "\", \"" + r.model +
                     "\"): lines " + std::to_string(it->second) + " and " +
                     std::to_string(lineno)});
}

struct JudgmentScanState {
  // (prompt, judge, unordered pair) -> orders seen
  std::map<std::string, std::pair<bool, bool>> orders;
  std::set<std::string> unknown_ids_reported;
};

std::string unordered_pair_key(const JudgmentRecord& r) {
  std::string lo = std::min(r.model_a, r.model_b);
  std::string hi = std::max(r.model_a, r.model_b);
  return r.prompt_id + "/" + r.judge + "/" + lo + "/" + hi;
}

void validate_judgments(const json& j, size_t lineno, ValidationReport& rep,
                        JudgmentScanState& state, const std::vector<ModelRef>* manifest) {
  // Verdict errors should be phrased in the report even though from_json throws.
  if (j.contains("verdict") && j.at("verdict").is_string()) {
    const std::string v = j.at("verdict").get<std::string>();
    if (v != "A" && v != "B" && v != "tie") {
      rep.violations.push_back({lineno, "unknown verdict \"" + v + "\""});
      return;
    }
  }
  JudgmentRecord r;
  try {
    r = j.get<JudgmentRecord>();
  } catch (const std::exception& e) {
    rep.violations.push_back({lineno, e.what()});
    return;
  }
  if (r.model_a == r.model_b)
    rep.violations.push_back({lineno, "model_a equals model_b (\"" + r.model_a + "\")"});
  if (r.order_index != 0 && r.order_index != 1)
    rep.violations.push_back({lineno, "order_index must be 0 or 1"});
  else {
    auto& seen = state.orders[unordered_pair_key(r)];
    if (r.order_index == 0) seen.first = true;
    else seen.second = true;
  }
  if (manifest) {
    for (const std::string& id : {r.judge, r.model_a, r.model_b}) {
      bool found = std::any_of(manifest->begin(), manifest->end(),
                               [&](const ModelRef& m) { return m.id == id; });
      if (!found && state.unknown_ids_reported.insert(id).second)
        rep.violations.push_back({lineno, "model id \"" + id + "\" not in manifest"});
    }
  }
}

}  // namespace

ValidationReport validate_dataset(const std::filesystem::path& path, dataset_schema schema,
                                  bool strict, const std::vector<ModelRef>* manifest) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot open " + path.string());

  ValidationReport rep;
  LineScanner scanner{path, strict, rep};
  std::map<std::string, size_t> prompt_ids;
  std::map<std::pair<std::string, std::string>, size_t> response_keys;
  JudgmentScanState jstate;

  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto j = scanner.parse(line, lineno);
    if (!j) continue;
    ++rep.records;
    switch (schema) {
      case dataset_schema::prompts: validate_prompts(*j, lineno, rep, prompt_ids); break;
      case dataset_schema::responses: validate_responses(*j, lineno, rep, response_keys); break;
      case dataset_schema::judgments: validate_judgments(*j, lineno, rep, jstate, manifest); break;
    }
  }

  if (schema == dataset_schema::judgments) {
    for (const auto& [pairkey, orders] : jstate.orders) {
      if (orders.second && !orders.first)
        rep.violations.push_back(
            {0, "swapped-order record without canonical sibling: " + pairkey});
    }
  }
  return rep;
}

}  // namespace leakscope
