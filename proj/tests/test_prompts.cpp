#include <doctest.h>

#include "leakscope/prompts.hpp"
#include "support.hpp"

using namespace leakscope;
using namespace leakscope::prompts;

namespace {

Registry source_registry() { return Registry::load(testutil::source_dir() / "templates"); }

}  // namespace

TEST_CASE("every rendered template matches its golden file byte-for-byte") {
  Registry reg = source_registry();
  for (template_id id : kAllTemplates) {
    const std::string name = to_string(id);
    CAPTURE(name);
    std::string rendered = reg.render(id, testutil::golden_slots(name));
    std::string golden =
        testutil::slurp(testutil::source_dir() / "golden" / (name + ".golden.txt"));
    REQUIRE_FALSE(golden.empty());
    CHECK(rendered == golden);
  }
}

TEST_CASE("template bodies carry the transcribed landmarks") {
  Registry reg = source_registry();
  const std::string& pj = reg.get(template_id::pairwise_judgment).body;
  CHECK(pj.find("Please act as an impartial judge") != std::string::npos);
  CHECK(pj.find("[The Start of Assistant A's Answer]") != std::string::npos);
  CHECK(pj.find("\"prefered answer\"") != std::string::npos);

  const std::string& pr = reg.get(template_id::pointwise_recognition).body;
  CHECK(pr.find("trained on a synthetic dataset you produced") != std::string::npos);

  const std::string& jd = reg.get(template_id::judgment_dimension).body;
  CHECK(jd.find("carries acertain degree of responsibility") != std::string::npos);
  CHECK(jd.find("[\"correctness\", \"mistakes\"]") != std::string::npos);
}

TEST_CASE("rendering the worked pairwise prompt") {
  Registry reg = source_registry();
  std::string out = reg.render(template_id::pairwise_judgment,
                               {{"[INSTRUCTION]", "X"}, {"[RESPONSE A]", "a"},
                                {"[RESPONSE B]", "b"}});
  CHECK(out.find("Please act as an impartial judge") != std::string::npos);
  CHECK(out.find("## Instruction: X") != std::string::npos);
  CHECK(out.find("[The Start of Assistant A's Answer]\n\na\n") != std::string::npos);
  CHECK(out.find("[RESPONSE A]") == std::string::npos);
}

TEST_CASE("empty slot values substitute cleanly") {
  Registry reg = source_registry();
  std::string out = reg.render(template_id::question_type, {{"[QUESTION]", ""}});
  CHECK(out.find("## Question: \n") != std::string::npos);
  CHECK(out.find("[QUESTION]") == std::string::npos);
}

TEST_CASE("render rejects missing, extra, and unknown inputs") {
  Registry reg = source_registry();
  CHECK_THROWS_WITH_AS(
      reg.render(template_id::pointwise_recognition, {{"[INSTRUCTION]", "x"}}),
      doctest::Contains("missing slot"), data_error);
  CHECK_THROWS_WITH_AS(
      reg.render(template_id::question_type,
                 {{"[QUESTION]", "q"}, {"[JUDGMENT]", "j"}}),
      doctest::Contains("extra slot"), data_error);
  CHECK_THROWS_AS(template_id_from_string("no_such_template"), data_error);
}

TEST_CASE("render is pure: same inputs, same bytes") {
  Registry reg = source_registry();
  auto slots = testutil::golden_slots("pairwise_recognition");
  CHECK(reg.render(template_id::pairwise_recognition, slots) ==
        reg.render(template_id::pairwise_recognition, slots));
}

TEST_CASE("slot values containing placeholder tokens are not re-substituted") {
  Registry reg = source_registry();
  std::string out = reg.render(template_id::question_type, {{"[QUESTION]", "[QUESTION]"}});
  CHECK(out.find("## Question: [QUESTION]") != std::string::npos);
}

TEST_CASE("expected label enumerations match the category vocabularies") {
  auto qt = expected_labels(template_id::question_type);
  REQUIRE(qt.size() == 7);
  CHECK(qt.front() == "Computer Science & Programming");
  CHECK(qt[1] == "Mathematics & Statistics");
  CHECK(qt[4] == "Writing & Communication");
  CHECK(qt.back() == "Others");

  auto jd = expected_labels(template_id::judgment_dimension);
  REQUIRE(jd.size() == 9);
  CHECK(std::find(jd.begin(), jd.end(), "Factuality") != jd.end());
  CHECK(std::find(jd.begin(), jd.end(), "Fairness and Responsibility") != jd.end());
  CHECK(jd.back() == "Others");

  CHECK(expected_labels(template_id::pointwise_recognition) ==
        std::vector<std::string>{"yes", "no"});
  CHECK(expected_labels(template_id::pairwise_recognition) ==
        std::vector<std::string>{"1", "2"});
  CHECK(expected_labels(template_id::pairwise_judgment) ==
        std::vector<std::string>{"[[A]]", "[[B]]"});
}

TEST_CASE("verdict label maps") {
  auto plain = verdict_labels();
  CHECK(plain.labels() == std::vector<std::string>{"[[A]]", "[[B]]"});

  auto with_tie = verdict_labels(std::string("[[C]]"));
  REQUIRE(with_tie.entries.size() == 3);
  CHECK(with_tie.entries[2].second == verdict::tie);

  auto graded = verdict_labels(std::nullopt, true);
  REQUIRE(graded.entries.size() == 7);
  bool has_strong_b = false;
  for (const auto& [label, v] : graded.entries)
    if (label == "[[B>>A]]" && v == verdict::b) has_strong_b = true;
  CHECK(has_strong_b);
}

TEST_CASE("loading fails when a template file is missing its placeholder") {
  testutil::TempDir tmp;
  for (template_id id : kAllTemplates) {
    std::string body = testutil::slurp(testutil::source_dir() / "templates" /
                                       (to_string(id) + ".txt"));
    testutil::spit(tmp.file(to_string(id) + ".txt"), body);
  }
  testutil::spit(tmp.file("question_type.txt"), "no placeholder here\n");
  CHECK_THROWS_WITH_AS(Registry::load(tmp.path()), doctest::Contains("missing placeholder"),
                       data_error);
}
