#include "leakscope/planner.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "leakscope/rng.hpp"

namespace leakscope::planner {

std::string to_string(learning_method m) {
  switch (m) {
    case learning_method::sft: return "sft";
    case learning_method::dpo: return "dpo";
    case learning_method::icl: return "icl";
  }
  return "?";
}

learning_method learning_method_from_string(const std::string& s) {
  if (s == "sft") return learning_method::sft;
  if (s == "dpo") return learning_method::dpo;
  if (s == "icl") return learning_method::icl;
  throw data_error("unknown learning method \"" + s + "\"");
}

void to_json(json& j, const ExperimentPlan& p) {
  j = json{{"name", p.name},
           {"relatedness", p.relatedness},
           {"learning_method", to_string(p.method)},
           {"generator", p.generator},
           {"judges", p.judges},
           {"seed", p.seed},
           {"responses_per_instruction", p.responses_per_instruction},
           {"demonstrations_per_generator", p.demonstrations_per_generator}};
  if (p.mixture) j["mixture"] = *p.mixture;
}

void from_json(const json& j, ExperimentPlan& p) {
  p.name = j.at("name").get<std::string>();
  p.relatedness = j.at("relatedness").get<RelatednessSpec>();
  p.method = learning_method_from_string(j.at("learning_method").get<std::string>());
  p.generator = j.at("generator").get<ModelRef>();
  p.judges = j.at("judges").get<std::vector<ModelRef>>();
  p.seed = j.at("seed").get<int64_t>();
  p.responses_per_instruction = j.value("responses_per_instruction", 1);
  p.demonstrations_per_generator = j.value("demonstrations_per_generator", 0);
  p.mixture.reset();
  if (j.contains("mixture")) p.mixture = j.at("mixture").get<MixManifest>();
}

MixManifest plan_mixture(std::span<const std::string> pool_synthetic,
                         std::span<const std::string> pool_filler, double fraction,
                         long long total, filler_kind filler,
                         const std::string& synthetic_source, int64_t seed) {
  if (!(fraction >= 0.0 && fraction <= 1.0))
    throw data_error("synthetic fraction must be in [0, 1]");
  if (total < 0) throw data_error("total must be >= 0");

  const long long n_synth = std::llround(fraction * static_cast<double>(total));
  const long long n_fill = total - n_synth;
  if (static_cast<long long>(pool_synthetic.size()) < n_synth)
    throw data_error("synthetic pool exhausted: need " + std::to_string(n_synth) + ", have " +
                     std::to_string(pool_synthetic.size()));
  if (static_cast<long long>(pool_filler.size()) < n_fill)
    throw data_error("filler pool exhausted: need " + std::to_string(n_fill) + ", have " +
                     std::to_string(pool_filler.size()));

  std::set<std::string> synth_set(pool_synthetic.begin(), pool_synthetic.end());
  if (synth_set.size() != pool_synthetic.size())
    throw data_error("synthetic pool contains duplicate prompt ids");
  std::set<std::string> filler_set(pool_filler.begin(), pool_filler.end());
  if (filler_set.size() != pool_filler.size())
    throw data_error("filler pool contains duplicate prompt ids");
  for (const std::string& id : filler_set)
    if (synth_set.count(id)) throw data_error("pools overlap on prompt id \"" + id + "\"");

  const uint64_t useed = static_cast<uint64_t>(seed);
  std::vector<std::string> synth(pool_synthetic.begin(), pool_synthetic.end());
  rng::Stream s1(rng::key({useed, rng::hash_str("mixture-synthetic")}));
  rng::shuffle(synth, s1);
  std::vector<std::string> fill(pool_filler.begin(), pool_filler.end());
  rng::Stream s2(rng::key({useed, rng::hash_str("mixture-filler")}));
  rng::shuffle(fill, s2);

  MixManifest m;
  m.total = total;
  m.synthetic_fraction = fraction;
  m.synthetic_source = synthetic_source;
  m.filler = filler;
  m.seed = seed;
  m.items.reserve(static_cast<size_t>(total));
  for (long long i = 0; i < n_synth; ++i)
    m.items.push_back({synth[static_cast<size_t>(i)], item_origin::synthetic});
  for (long long i = 0; i < n_fill; ++i)
    m.items.push_back({fill[static_cast<size_t>(i)], item_origin::filler});
  rng::Stream s3(rng::key({useed, rng::hash_str("mixture-order")}));
  rng::shuffle(m.items, s3);
  return m;
}

ExperimentPlan plan_relatedness(const RelatednessSpec& spec, const ModelRef& generator,
                                std::vector<ModelRef> judges, learning_method method,
                                int64_t seed, const std::string& name) {
  spec.validate();
  if (generator.id.empty()) throw data_error("generator id is empty");
  if (judges.empty()) {
    if (spec.kind != relatedness_kind::same_model)
      throw data_error("at least one judge is required");
    ModelRef self = generator;
    self.role = model_role::judge;
    judges.push_back(std::move(self));
  }
  if (spec.kind == relatedness_kind::same_model) {
    for (const ModelRef& judge : judges)
      if (judge.id != generator.id)
        throw data_error("same_model requires generator and judge to be the same model, got \"" +
                         judge.id + "\"");
  }

  ExperimentPlan plan;
  plan.name = name;
  plan.relatedness = spec;
  plan.method = method;
  plan.generator = generator;
  plan.judges = std::move(judges);
  plan.seed = seed;
  plan.responses_per_instruction = method == learning_method::dpo ? 2 : 1;
  plan.demonstrations_per_generator = method == learning_method::icl ? 4 : 0;
  return plan;
}

}  // namespace leakscope::planner
