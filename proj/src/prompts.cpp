#include "leakscope/prompts.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

#ifndef LEAKSCOPE_SOURCE_DIR
#define LEAKSCOPE_SOURCE_DIR "."
#endif

namespace leakscope::prompts {

std::string to_string(template_id id) {
  switch (id) {
    case template_id::pairwise_judgment: return "pairwise_judgment";
    case template_id::pointwise_recognition: return "pointwise_recognition";
    case template_id::pairwise_recognition: return "pairwise_recognition";
    case template_id::question_type: return "question_type";
    case template_id::judgment_dimension: return "judgment_dimension";
  }
  return "?";
}

template_id template_id_from_string(const std::string& s) {
  for (template_id id : kAllTemplates)
    if (to_string(id) == s) return id;
  throw data_error("unknown template \"" + s + "\"");
}

namespace {

std::vector<std::string> placeholders_for(template_id id) {
  switch (id) {
    case template_id::pairwise_judgment:
      return {"[INSTRUCTION]", "[RESPONSE A]", "[RESPONSE B]"};
    case template_id::pointwise_recognition: return {"[INSTRUCTION]", "[RESPONSE]"};
    case template_id::pairwise_recognition:
      return {"[INSTRUCTION]", "[RESPONSE 1]", "[RESPONSE 2]"};
    case template_id::question_type: return {"[QUESTION]"};
    case template_id::judgment_dimension: return {"[JUDGMENT]"};
  }
  return {};
}

std::string output_schema_for(template_id id) {
  switch (id) {
    case template_id::pairwise_judgment:
      return "JSON object with \"reason\" and \"prefered answer\" ([[A]] or [[B]])";
    case template_id::pointwise_recognition:
      return "JSON object with \"reason\" and \"judgment\" (yes or no)";
    case template_id::pairwise_recognition:
      return "JSON object with \"reason\" and \"judgment\" (1 or 2)";
    case template_id::question_type:
      return "JSON object with \"question category\" (one of 7 category names)";
    case template_id::judgment_dimension:
      return "JSON object keyed by dimension names, each a list of cited aspects";
  }
  return {};
}

std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot open template file " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace

Registry Registry::load(const std::filesystem::path& dir) {
  Registry reg;
  for (template_id id : kAllTemplates) {
    Template t;
    t.id = id;
    t.body = read_file_bytes(dir / (to_string(id) + ".txt"));
    t.placeholders = placeholders_for(id);
    t.output_schema = output_schema_for(id);
    for (const std::string& ph : t.placeholders)
      if (t.body.find(ph) == std::string::npos)
        throw data_error("template " + to_string(id) + " is missing placeholder " + ph);
    reg.templates_.emplace(id, std::move(t));
  }
  return reg;
}

std::filesystem::path Registry::default_dir() {
  if (const char* env = std::getenv("LEAKSCOPE_TEMPLATES_DIR")) return env;
  if (std::filesystem::exists("templates/pairwise_judgment.txt")) return "templates";
  return std::filesystem::path(LEAKSCOPE_SOURCE_DIR) / "templates";
}

Registry Registry::load_default() { return load(default_dir()); }

const Template& Registry::get(template_id id) const {
  auto it = templates_.find(id);
  if (it == templates_.end()) throw data_error("template not loaded: " + to_string(id));
  return it->second;
}

std::string Registry::render(template_id id,
                             const std::map<std::string, std::string>& slots) const {
  const Template& t = get(id);
  for (const auto& [k, _] : slots)
    if (std::find(t.placeholders.begin(), t.placeholders.end(), k) == t.placeholders.end())
      throw data_error("extra slot " + k + " for template " + to_string(id));
  for (const std::string& ph : t.placeholders)
    if (!slots.count(ph))
      throw data_error("missing slot " + ph + " for template " + to_string(id));

  // Single pass so slot values containing placeholder tokens are not
  // re-substituted.
  std::string out;
  out.reserve(t.body.size());
  size_t i = 0;
  while (i < t.body.size()) {
    bool matched = false;
    for (const std::string& ph : t.placeholders) {
      if (t.body.compare(i, ph.size(), ph) == 0) {
        out += slots.at(ph);
        i += ph.size();
        matched = true;
        break;
      }
    }
    if (!matched) out += t.body[i++];
  }
  return out;
}

std::vector<std::string> expected_labels(template_id id) {
  switch (id) {
    case template_id::pairwise_judgment: return {"[[A]]", "[[B]]"};
    case template_id::pointwise_recognition: return {"yes", "no"};
    case template_id::pairwise_recognition: return {"1", "2"};
    case template_id::question_type: return question_type_labels();
    case template_id::judgment_dimension: return judgment_dimension_labels();
  }
  return {};
}

std::vector<std::string> VerdictLabels::labels() const {
  std::vector<std::string> out;
  out.reserve(entries.size());
  for (const auto& [label, _] : entries) out.push_back(label);
  return out;
}

VerdictLabels verdict_labels(const std::optional<std::string>& tie_label, bool graded) {
  VerdictLabels v;
  v.entries = {{"[[A]]", verdict::a}, {"[[B]]", verdict::b}};
  if (tie_label) v.entries.emplace_back(*tie_label, verdict::tie);
  if (graded) {
    v.entries.emplace_back("[[A>>B]]", verdict::a);
    v.entries.emplace_back("[[A>B]]", verdict::a);
    v.entries.emplace_back("[[A=B]]", verdict::tie);
    v.entries.emplace_back("[[B>A]]", verdict::b);
    v.entries.emplace_back("[[B>>A]]", verdict::b);
  }
  return v;
}

}  // namespace leakscope::prompts
