#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "leakscope/core.hpp"

namespace leakscope::prompts {

enum class template_id {
  pairwise_judgment,
  pointwise_recognition,
  pairwise_recognition,
  question_type,
  judgment_dimension,
};

constexpr std::array<template_id, 5> kAllTemplates = {
    template_id::pairwise_judgment, template_id::pointwise_recognition,
    template_id::pairwise_recognition, template_id::question_type,
    template_id::judgment_dimension};

std::string to_string(template_id id);
template_id template_id_from_string(const std::string& s);

struct Template {
  template_id id;
  std::string body;                       // verbatim file bytes
  std::vector<std::string> placeholders;  // e.g. "[INSTRUCTION]"
  std::string output_schema;              // short description of the expected JSON
};

// Templates live as .txt assets so they can be diffed against their source;
// the registry loads them once and is immutable afterwards.
class Registry {
 public:
  static Registry load(const std::filesystem::path& dir);
  // Resolution order: $LEAKSCOPE_TEMPLATES_DIR, ./templates, the build-tree
  // source directory.
  static Registry load_default();
  static std::filesystem::path default_dir();

  const Template& get(template_id id) const;

  // Pure single-pass substitution: slot keys must exactly match the
  // template's placeholder set; values are inserted without any trimming or
  // re-wrapping.
  std::string render(template_id id, const std::map<std::string, std::string>& slots) const;

 private:
  std::map<template_id, Template> templates_;
};

// Label enumerations the judge is instructed to answer with.
std::vector<std::string> expected_labels(template_id id);

// Verdict-label mapping for the pairwise judgment prompt. The default is the
// bare [[A]]/[[B]] pair; a tie label and the graded Arena-Hard extension
// ([[A>>B]], [[A>B]], [[A=B]], [[B>A]], [[B>>A]]) are optional.
struct VerdictLabels {
  std::vector<std::pair<std::string, verdict>> entries;
  std::vector<std::string> labels() const;
};

VerdictLabels verdict_labels(const std::optional<std::string>& tie_label = std::nullopt,
                             bool graded = false);

}  // namespace leakscope::prompts
