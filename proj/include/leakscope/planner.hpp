#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "leakscope/core.hpp"

namespace leakscope::planner {

enum class learning_method { sft, dpo, icl };

std::string to_string(learning_method m);
learning_method learning_method_from_string(const std::string& s);

struct ExperimentPlan {
  std::string name;
  RelatednessSpec relatedness;
  learning_method method = learning_method::sft;
  std::optional<MixManifest> mixture;
  ModelRef generator;
  std::vector<ModelRef> judges;
  int64_t seed = 0;
  // Method parameters fixed by the protocol: DPO samples two responses per
  // instruction; ICL carries four demonstration pairs per generator.
  int responses_per_instruction = 1;
  int demonstrations_per_generator = 0;
};

void to_json(json& j, const ExperimentPlan& p);
void from_json(const json& j, ExperimentPlan& p);

// Draws round(fraction * total) prompts from the synthetic pool and fills the
// remainder from the filler pool, both by seeded shuffle without
// replacement. Pools must be disjoint and large enough. Regeneration with
// the same arguments is byte-identical.
MixManifest plan_mixture(std::span<const std::string> pool_synthetic,
                         std::span<const std::string> pool_filler, double fraction,
                         long long total, filler_kind filler,
                         const std::string& synthetic_source, int64_t seed);

// Encodes one relatedness configuration: which model generates, which judges
// evaluate, and (for inheritance) whether the SFT-stage instructions are
// reused. same_model requires generator and judge to be the same id.
ExperimentPlan plan_relatedness(const RelatednessSpec& spec, const ModelRef& generator,
                                std::vector<ModelRef> judges, learning_method method,
                                int64_t seed, const std::string& name);

}  // namespace leakscope::planner
