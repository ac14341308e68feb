#include <doctest.h>

#include <set>

#include "leakscope/planner.hpp"
#include "support.hpp"

using namespace leakscope;
using namespace leakscope::planner;

namespace {

std::vector<std::string> pool(const std::string& prefix, int n) {
  std::vector<std::string> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

long long count_origin(const MixManifest& m, item_origin origin) {
  long long n = 0;
  for (const auto& item : m.items)
    if (item.origin == origin) ++n;
  return n;
}

}  // namespace

TEST_CASE("30% of 30000 splits 9000 synthetic + 21000 filler") {
  auto synth = pool("s", 12000);
  auto fill = pool("f", 25000);
  auto m = plan_mixture(synth, fill, 0.3, 30000, filler_kind::manual, "gen", 42);
  CHECK(m.total == 30000);
  CHECK(static_cast<long long>(m.items.size()) == 30000);
  CHECK(count_origin(m, item_origin::synthetic) == 9000);
  CHECK(count_origin(m, item_origin::filler) == 21000);

  std::set<std::string> seen;
  for (const auto& item : m.items) REQUIRE(seen.insert(item.prompt_id).second);
}

TEST_CASE("fraction 0 is pure filler; fraction 1 is pure synthetic") {
  auto synth = pool("s", 50);
  auto fill = pool("f", 50);
  auto zero = plan_mixture(synth, fill, 0.0, 40, filler_kind::manual, "gen", 1);
  CHECK(count_origin(zero, item_origin::synthetic) == 0);
  auto one = plan_mixture(synth, fill, 1.0, 40, filler_kind::multi_source_synthetic, "gen", 1);
  CHECK(count_origin(one, item_origin::filler) == 0);
}

TEST_CASE("same seed regenerates a byte-identical manifest") {
  auto synth = pool("s", 30);
  auto fill = pool("f", 30);
  auto a = plan_mixture(synth, fill, 0.5, 10, filler_kind::manual, "gen", 42);
  auto b = plan_mixture(synth, fill, 0.5, 10, filler_kind::manual, "gen", 42);
  CHECK(json(a).dump() == json(b).dump());
  auto c = plan_mixture(synth, fill, 0.5, 10, filler_kind::manual, "gen", 43);
  CHECK(json(a).dump() != json(c).dump());
}

TEST_CASE("mixture error paths") {
  auto synth = pool("s", 5);
  auto fill = pool("f", 5);
  CHECK_THROWS_WITH_AS(plan_mixture(synth, fill, 0.9, 10, filler_kind::manual, "g", 1),
                       doctest::Contains("synthetic pool exhausted"), data_error);
  CHECK_THROWS_WITH_AS(plan_mixture(synth, fill, 0.1, 10, filler_kind::manual, "g", 1),
                       doctest::Contains("filler pool exhausted"), data_error);
  CHECK_THROWS_AS(plan_mixture(synth, fill, 1.5, 4, filler_kind::manual, "g", 1), data_error);

  auto overlapping = pool("s", 5);
  CHECK_THROWS_WITH_AS(plan_mixture(synth, overlapping, 0.5, 4, filler_kind::manual, "g", 1),
                       doctest::Contains("overlap"), data_error);

  std::vector<std::string> dup = {"x", "x", "y"};
  CHECK_THROWS_WITH_AS(plan_mixture(dup, fill, 0.5, 4, filler_kind::manual, "g", 1),
                       doctest::Contains("duplicate"), data_error);
}

TEST_CASE("rounding of the synthetic share") {
  auto synth = pool("s", 10);
  auto fill = pool("f", 10);
  // round(0.25 * 10) = 3 with half-away rounding of 2.5
  auto m = plan_mixture(synth, fill, 0.25, 10, filler_kind::manual, "g", 1);
  CHECK(count_origin(m, item_origin::synthetic) == 3);
}

// ---------------------------------------------------------------------------
// plan_relatedness
// ---------------------------------------------------------------------------

namespace {

ModelRef model(const std::string& id, model_role role) {
  return ModelRef{id, role, std::nullopt, std::nullopt};
}

}  // namespace

TEST_CASE("same_model plans default the judge to the generator") {
  RelatednessSpec spec;
  spec.kind = relatedness_kind::same_model;
  auto plan = plan_relatedness(spec, model("gpt-4o", model_role::generator), {},
                               learning_method::sft, 7, "same-model-sft");
  REQUIRE(plan.judges.size() == 1);
  CHECK(plan.judges[0].id == "gpt-4o");
  CHECK(plan.judges[0].role == model_role::judge);
  CHECK(plan.responses_per_instruction == 1);
  CHECK(plan.demonstrations_per_generator == 0);

  CHECK_THROWS_WITH_AS(
      plan_relatedness(spec, model("gpt-4o", model_role::generator),
                       {model("gemini", model_role::judge)}, learning_method::sft, 7, "bad"),
      doctest::Contains("same_model requires"), data_error);
}

TEST_CASE("inheritance plans record direction and instruction reuse") {
  RelatednessSpec spec;
  spec.kind = relatedness_kind::inheritance;
  spec.direction = inheritance_direction::generator_from_judge;
  spec.instructions = instruction_reuse::same_instructions;
  auto plan = plan_relatedness(spec, model("mistral-distilled", model_role::generator),
                               {model("gpt-4o", model_role::judge)}, learning_method::sft, 7,
                               "inheritance-same-ins");
  CHECK(plan.relatedness.instructions == instruction_reuse::same_instructions);
  json j = plan;
  CHECK(j.at("relatedness").at("instruction_reuse") == "same_instructions");
  CHECK(j.at("relatedness").at("inheritance_direction") == "generator_from_judge");
}

TEST_CASE("same_family plans pair generators with series-matched judges") {
  RelatednessSpec spec;
  spec.kind = relatedness_kind::same_family;
  spec.series = series_match::different_series;
  auto plan = plan_relatedness(spec, model("gpt-4o", model_role::generator),
                               {model("gpt-3.5-turbo", model_role::judge)},
                               learning_method::sft, 7, "family-diff-series");
  CHECK(plan.generator.id == "gpt-4o");
  CHECK(plan.judges[0].id == "gpt-3.5-turbo");
  CHECK(plan.relatedness.series == series_match::different_series);
}

TEST_CASE("invalid sub-option combinations are rejected") {
  RelatednessSpec spec;
  spec.kind = relatedness_kind::inheritance;
  spec.direction = inheritance_direction::judge_from_generator;
  spec.instructions = instruction_reuse::same_instructions;
  spec.series = series_match::same_series;  // series on inheritance
  CHECK_THROWS_AS(plan_relatedness(spec, model("g", model_role::generator),
                                   {model("j", model_role::judge)}, learning_method::sft, 7, "x"),
                  data_error);
}

TEST_CASE("method parameters follow the protocol") {
  RelatednessSpec spec;
  spec.kind = relatedness_kind::unrelated;
  auto dpo = plan_relatedness(spec, model("g", model_role::generator),
                              {model("j", model_role::judge)}, learning_method::dpo, 7, "dpo");
  CHECK(dpo.responses_per_instruction == 2);
  auto icl = plan_relatedness(spec, model("g", model_role::generator),
                              {model("j", model_role::judge)}, learning_method::icl, 7, "icl");
  CHECK(icl.demonstrations_per_generator == 4);
}

TEST_CASE("plans embed mixtures and round trip through JSON") {
  RelatednessSpec spec;
  spec.kind = relatedness_kind::unrelated;
  auto plan = plan_relatedness(spec, model("g", model_role::generator),
                               {model("j", model_role::judge)}, learning_method::sft, 99, "mixed");
  plan.mixture = plan_mixture(pool("s", 10), pool("f", 10), 0.5, 6, filler_kind::manual, "g", 99);

  json j = plan;
  ExperimentPlan back = j.get<ExperimentPlan>();
  CHECK(back.name == plan.name);
  CHECK(back.seed == plan.seed);
  REQUIRE(back.mixture.has_value());
  CHECK(json(*back.mixture).dump() == json(*plan.mixture).dump());
  CHECK(json(back).dump() == j.dump());
}
