#include "leakscope/analyses.hpp"

#include <algorithm>
#include <cctype>
#include <mutex>
#include <set>

#include <spdlog/spdlog.h>

#include "leakscope/rng.hpp"

namespace leakscope::analyses {

std::string to_string(recognition_mode m) {
  return m == recognition_mode::pointwise ? "pointwise" : "pairwise";
}

recognition_mode recognition_mode_from_string(const std::string& s) {
  if (s == "pointwise") return recognition_mode::pointwise;
  if (s == "pairwise") return recognition_mode::pairwise;
  throw data_error("unknown recognition mode \"" + s + "\"");
}

void to_json(json& j, const RecognitionRecord& r) {
  j = json{{"prompt_id", r.prompt_id}, {"mode", to_string(r.mode)}, {"truth", r.truth}};
  j["prediction"] = r.prediction ? json(*r.prediction) : json(nullptr);
  for (auto it = r.extra.begin(); it != r.extra.end(); ++it)
    if (!j.contains(it.key())) j[it.key()] = it.value();
}

void from_json(const json& j, RecognitionRecord& r) {
  r.prompt_id = j.at("prompt_id").get<std::string>();
  r.mode = recognition_mode_from_string(j.value("mode", std::string("pointwise")));
  r.truth = j.at("truth").is_string() ? j.at("truth").get<std::string>()
                                      : j.at("truth").dump();
  r.prediction.reset();
  if (j.contains("prediction") && !j.at("prediction").is_null())
    r.prediction = j.at("prediction").is_string() ? j.at("prediction").get<std::string>()
                                                  : j.at("prediction").dump();
  r.extra = j;
  for (const char* k : {"prompt_id", "mode", "truth", "prediction"}) r.extra.erase(k);
}

// ---------------------------------------------------------------------------
// Probe set construction
// ---------------------------------------------------------------------------

namespace {

std::map<std::string, const ResponseRecord*> index_by_prompt(
    std::span<const ResponseRecord> responses) {
  std::map<std::string, const ResponseRecord*> out;
  for (const ResponseRecord& r : responses) out.emplace(r.prompt_id, &r);
  return out;
}

void check_truth_domain(recognition_mode mode, const std::string& truth) {
  const bool ok = mode == recognition_mode::pointwise ? (truth == "yes" || truth == "no")
                                                      : (truth == "1" || truth == "2");
  if (!ok)
    throw data_error("truth \"" + truth + "\" outside the " + to_string(mode) +
                     " label domain");
}

}  // namespace

std::vector<RecognitionItem> build_pointwise_items(std::span<const PromptItem> questions,
                                                   std::span<const ResponseRecord> related,
                                                   std::span<const ResponseRecord> unrelated,
                                                   uint64_t seed) {
  auto by_related = index_by_prompt(related);
  auto by_unrelated = index_by_prompt(unrelated);

  std::vector<const PromptItem*> usable;
  for (const PromptItem& q : questions)
    if (by_related.count(q.id) && by_unrelated.count(q.id)) usable.push_back(&q);

  // Balanced 50/50: the first half of a seeded shuffle probes the related
  // student's response.
  std::vector<size_t> order(usable.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng::Stream stream(rng::key({seed, rng::hash_str("pointwise-balance")}));
  rng::shuffle(order, stream);
  std::set<size_t> related_half(order.begin(), order.begin() + order.size() / 2);

  std::vector<RecognitionItem> items;
  items.reserve(usable.size());
  for (size_t i = 0; i < usable.size(); ++i) {
    const PromptItem& q = *usable[i];
    const bool probe_related = related_half.count(i) > 0;
    RecognitionItem item;
    item.prompt_id = q.id;
    item.instruction = q.text;
    item.response = probe_related ? by_related.at(q.id)->text : by_unrelated.at(q.id)->text;
    item.truth = probe_related ? "yes" : "no";
    items.push_back(std::move(item));
  }
  return items;
}

std::vector<RecognitionItem> build_pairwise_items(std::span<const PromptItem> questions,
                                                  std::span<const ResponseRecord> related,
                                                  std::span<const ResponseRecord> unrelated,
                                                  uint64_t seed) {
  auto by_related = index_by_prompt(related);
  auto by_unrelated = index_by_prompt(unrelated);

  std::vector<const PromptItem*> usable;
  for (const PromptItem& q : questions)
    if (by_related.count(q.id) && by_unrelated.count(q.id)) usable.push_back(&q);

  // Position of the related response is random per item but balanced overall,
  // so a constant guesser scores exactly the chance baseline.
  std::vector<size_t> order(usable.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng::Stream stream(rng::key({seed, rng::hash_str("pairwise-position")}));
  rng::shuffle(order, stream);
  std::set<size_t> related_first_half(order.begin(), order.begin() + order.size() / 2);

  std::vector<RecognitionItem> items;
  items.reserve(usable.size());
  for (size_t i = 0; i < usable.size(); ++i) {
    const PromptItem& q = *usable[i];
    const bool related_first = related_first_half.count(i) > 0;
    RecognitionItem item;
    item.prompt_id = q.id;
    item.instruction = q.text;
    item.response = related_first ? by_related.at(q.id)->text : by_unrelated.at(q.id)->text;
    item.response2 = related_first ? by_unrelated.at(q.id)->text : by_related.at(q.id)->text;
    item.truth = related_first ? "1" : "2";
    items.push_back(std::move(item));
  }
  return items;
}

// ---------------------------------------------------------------------------
// Probe execution and scoring
// ---------------------------------------------------------------------------

namespace {

std::optional<json> find_json_object(const std::string& raw) {
  json j = json::parse(raw, nullptr, false);
  if (!j.is_discarded() && j.is_object()) return j;
  size_t open = raw.find('{');
  size_t close = raw.rfind('}');
  if (open == std::string::npos || close == std::string::npos || close <= open)
    return std::nullopt;
  j = json::parse(raw.substr(open, close - open + 1), nullptr, false);
  if (!j.is_discarded() && j.is_object()) return j;
  return std::nullopt;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::optional<std::string> parse_recognition_prediction(recognition_mode mode,
                                                        const std::string& raw) {
  auto obj = find_json_object(raw);
  if (!obj || !obj->contains("judgment")) return std::nullopt;
  const json& v = obj->at("judgment");
  if (mode == recognition_mode::pointwise) {
    if (!v.is_string()) return std::nullopt;
    std::string s = lower(v.get<std::string>());
    if (s == "yes" || s == "no") return s;
    return std::nullopt;
  }
  if (v.is_number_integer()) {
    long long n = v.get<long long>();
    if (n == 1 || n == 2) return std::to_string(n);
    return std::nullopt;
  }
  if (v.is_string()) {
    std::string s = v.get<std::string>();
    if (s == "1" || s == "2") return s;
  }
  return std::nullopt;
}

}  // namespace

std::vector<RecognitionRecord> run_recognition_probe(const orchestrator::ProviderConfig& judge,
                                                     recognition_mode mode,
                                                     std::span<const RecognitionItem> items,
                                                     const prompts::Registry& registry) {
  for (const RecognitionItem& item : items) {
    check_truth_domain(mode, item.truth);
    if (mode == recognition_mode::pairwise && !item.response2)
      throw data_error("pairwise probe item " + item.prompt_id + " lacks a second response");
  }

  std::vector<RecognitionRecord> records(items.size());
  orchestrator::parallel_for(items.size(), judge.max_concurrency, [&](size_t i) {
    const RecognitionItem& item = items[i];
    std::string prompt;
    if (mode == recognition_mode::pointwise) {
      prompt = registry.render(prompts::template_id::pointwise_recognition,
                               {{"[INSTRUCTION]", item.instruction},
                                {"[RESPONSE]", item.response}});
    } else {
      prompt = registry.render(prompts::template_id::pairwise_recognition,
                               {{"[INSTRUCTION]", item.instruction},
                                {"[RESPONSE 1]", item.response},
                                {"[RESPONSE 2]", *item.response2}});
    }
    std::string raw = orchestrator::chat(judge, prompt);
    RecognitionRecord rec;
    rec.prompt_id = item.prompt_id;
    rec.mode = mode;
    rec.truth = item.truth;
    rec.prediction = parse_recognition_prediction(mode, raw);
    rec.extra["raw"] = raw;
    records[i] = std::move(rec);
  });
  return records;
}

RecognitionScore score_recognition(std::span<const RecognitionRecord> records) {
  if (records.empty()) throw data_error("no recognition records to score");
  RecognitionScore s;
  s.total = static_cast<long long>(records.size());
  for (const RecognitionRecord& rec : records) {
    ++s.truth_counts[rec.truth];
    if (!rec.prediction) {
      ++s.invalid;
      continue;
    }
    ++s.valid;
    *rec.prediction == rec.truth ? ++s.correct : ++s.incorrect;
  }
  if (s.valid == 0) throw data_error("every recognition record is invalid");
  s.accuracy = static_cast<double>(s.correct) / static_cast<double>(s.valid);
  long long max_class = 0;
  for (const auto& [_, n] : s.truth_counts) max_class = std::max(max_class, n);
  s.chance_baseline = static_cast<double>(max_class) / static_cast<double>(s.total);
  return s;
}

json recognition_score_json(const RecognitionScore& s) {
  return json{{"total", s.total},       {"valid", s.valid},
              {"correct", s.correct},   {"incorrect", s.incorrect},
              {"invalid", s.invalid},   {"accuracy", s.accuracy},
              {"chance_baseline", s.chance_baseline}, {"truth_counts", s.truth_counts}};
}

// ---------------------------------------------------------------------------
// Categorization
// ---------------------------------------------------------------------------

std::string to_string(category_scheme s) {
  return s == category_scheme::question_type ? "question_type" : "judgment_dimension";
}

category_scheme category_scheme_from_string(const std::string& s) {
  if (s == "question_type") return category_scheme::question_type;
  if (s == "judgment_dimension") return category_scheme::judgment_dimension;
  throw data_error("unknown category scheme \"" + s + "\"");
}

const std::vector<std::string>& scheme_labels(category_scheme s) {
  return s == category_scheme::question_type ? question_type_labels()
                                             : judgment_dimension_labels();
}

void to_json(json& j, const CategoryAssignment& a) {
  j = json{{"subject_id", a.subject_id}, {"scheme", to_string(a.scheme)}, {"labels", a.labels}};
  for (auto it = a.extra.begin(); it != a.extra.end(); ++it)
    if (!j.contains(it.key())) j[it.key()] = it.value();
}

void from_json(const json& j, CategoryAssignment& a) {
  a.subject_id = j.at("subject_id").get<std::string>();
  a.scheme = category_scheme_from_string(j.at("scheme").get<std::string>());
  a.labels = j.at("labels").get<std::vector<std::string>>();
  if (a.labels.empty()) throw data_error("assignment for " + a.subject_id + " has no labels");
  a.extra = j;
  for (const char* k : {"subject_id", "scheme", "labels"}) a.extra.erase(k);
}

namespace {

// Extracts labels from one categorization reply; unknown labels become
// "Others" with a warning.
std::vector<std::string> parse_assignment_labels(category_scheme scheme, const json& obj,
                                                 const std::string& subject_id,
                                                 std::vector<std::string>& warnings) {
  const std::vector<std::string>& known = scheme_labels(scheme);
  auto is_known = [&](const std::string& label) {
    return std::find(known.begin(), known.end(), label) != known.end();
  };

  std::vector<std::string> labels;
  if (scheme == category_scheme::question_type) {
    if (!obj.contains("question category") || !obj.at("question category").is_string())
      throw data_error("no \"question category\" field");
    std::string label = obj.at("question category").get<std::string>();
    if (!is_known(label)) {
      warnings.push_back("subject " + subject_id + ": unknown category \"" + label +
                         "\" mapped to Others");
      label = "Others";
    }
    labels.push_back(label);
  } else {
    std::set<std::string> found;
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      if (!it.value().is_array() || it.value().empty()) continue;
      std::string label = it.key();
      if (!is_known(label)) {
        warnings.push_back("subject " + subject_id + ": unknown dimension \"" + label +
                           "\" mapped to Others");
        label = "Others";
      }
      found.insert(label);
    }
    if (found.empty()) throw data_error("no dimension carried a non-empty aspect list");
    // canonical scheme order keeps assignment artifacts stable
    for (const std::string& label : known)
      if (found.count(label)) labels.push_back(label);
  }
  return labels;
}

}  // namespace

CategorizeOutcome categorize(const orchestrator::ProviderConfig& judge, category_scheme scheme,
                             std::span<const Subject> subjects,
                             const prompts::Registry& registry) {
  if (subjects.empty()) throw data_error("no subjects to categorize");

  const prompts::template_id tmpl = scheme == category_scheme::question_type
                                        ? prompts::template_id::question_type
                                        : prompts::template_id::judgment_dimension;
  const std::string slot =
      scheme == category_scheme::question_type ? "[QUESTION]" : "[JUDGMENT]";

  CategorizeOutcome outcome;
  outcome.assignments.resize(subjects.size());
  std::mutex warn_mutex;

  orchestrator::parallel_for(subjects.size(), judge.max_concurrency, [&](size_t i) {
    const Subject& subject = subjects[i];
    const std::string prompt = registry.render(tmpl, {{slot, subject.text}});

    std::vector<std::string> local_warnings;
    std::optional<std::vector<std::string>> labels;
    std::string failure;
    for (int attempt = 0; attempt < 2 && !labels; ++attempt) {
      std::string raw = orchestrator::chat(judge, prompt,
                                           {.bypass_cache = attempt > 0});
      auto obj = find_json_object(raw);
      if (!obj) {
        failure = "reply is not a JSON object";
        continue;
      }
      try {
        labels = parse_assignment_labels(scheme, *obj, subject.id, local_warnings);
      } catch (const data_error& e) {
        failure = e.what();
      }
    }
    if (!labels)
      throw data_error("cannot categorize subject \"" + subject.id + "\" after one retry: " +
                       failure);

    CategoryAssignment a;
    a.subject_id = subject.id;
    a.scheme = scheme;
    a.labels = *labels;
    outcome.assignments[i] = std::move(a);
    if (!local_warnings.empty()) {
      std::lock_guard<std::mutex> lock(warn_mutex);
      for (std::string& w : local_warnings) outcome.warnings.push_back(std::move(w));
    }
  });

  for (const std::string& w : outcome.warnings) spdlog::warn("{}", w);
  return outcome;
}

// ---------------------------------------------------------------------------
// Per-category PLS
// ---------------------------------------------------------------------------

std::map<std::string, CategoryPlsEntry> per_category_pls(
    std::span<const JudgmentRecord> judgments, std::span<const CategoryAssignment> assignments,
    const metrics::PairSpec& pair, int min_n, metrics::tie_policy policy) {
  if (assignments.empty()) throw data_error("no category assignments given");
  const category_scheme scheme = assignments.front().scheme;
  std::map<std::string, const CategoryAssignment*> by_subject;
  for (const CategoryAssignment& a : assignments) {
    if (a.scheme != scheme) throw data_error("mixed assignment schemes");
    by_subject[a.subject_id] = &a;
  }

  std::map<std::string, std::vector<JudgmentRecord>> subsets;
  for (const JudgmentRecord& rec : judgments) {
    const std::string subject =
        scheme == category_scheme::question_type ? rec.prompt_id : judgment_key(rec);
    auto it = by_subject.find(subject);
    if (it == by_subject.end())
      throw data_error("judgment subject \"" + subject + "\" has no category assignment");
    for (const std::string& label : it->second->labels) subsets[label].push_back(rec);
  }
  if (subsets.empty()) throw data_error("no label has any judgments");

  std::map<std::string, CategoryPlsEntry> out;
  for (auto& [label, subset] : subsets) {
    CategoryPlsEntry entry;
    std::set<std::string> prompts;
    for (const JudgmentRecord& rec : subset) prompts.insert(rec.prompt_id);
    entry.n_questions = static_cast<long long>(prompts.size());
    entry.sufficient = entry.n_questions >= min_n;
    if (entry.sufficient) entry.result = metrics::compute_pls_for_pair(subset, pair, policy);
    out.emplace(label, std::move(entry));
  }
  return out;
}

json category_pls_report_json(const std::map<std::string, CategoryPlsEntry>& per_label,
                              category_scheme scheme, int min_n, metrics::tie_policy policy) {
  json labels = json::object();
  for (const auto& [label, entry] : per_label) {
    if (entry.sufficient) {
      labels[label] = metrics::pls_report_json(*entry.result, policy);
    } else {
      labels[label] = json{{"insufficient_data", true}, {"n_questions", entry.n_questions}};
    }
  }
  return json{{"scheme", to_string(scheme)}, {"min_n", min_n}, {"per_label", std::move(labels)}};
}

}  // namespace leakscope::analyses
