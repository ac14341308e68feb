#include <doctest.h>

#include <cstdlib>

#include "leakscope/metrics.hpp"
#include "leakscope/orchestrator.hpp"
#include "leakscope/simulator.hpp"
#include "support.hpp"

using namespace leakscope;
using namespace leakscope::orchestrator;

namespace {

ProviderConfig test_provider(const sim::MockProvider& mock, const char* model = "judge-a") {
  ::setenv("LEAKSCOPE_TEST_KEY", "dummy-secret", 1);
  ProviderConfig p;
  p.base_url = mock.base_url();
  p.model = model;
  p.api_key_env = "LEAKSCOPE_TEST_KEY";
  p.max_retries = 3;
  p.retry_backoff = std::chrono::milliseconds(1);
  p.timeout = std::chrono::milliseconds(5000);
  return p;
}

}  // namespace

// ---------------------------------------------------------------------------
// parse_verdict
// ---------------------------------------------------------------------------

TEST_CASE("plain bracketed verdicts parse, last occurrence winning") {
  auto labels = prompts::verdict_labels();
  CHECK(parse_verdict("after thinking it over, my verdict: [[A]]", labels) == verdict::a);
  CHECK(parse_verdict("[[B]]", labels) == verdict::b);
  CHECK(parse_verdict("either [[A]] or [[B]] could apply... final: [[A]]", labels) == verdict::a);
}

TEST_CASE("appendix-style JSON objects parse") {
  auto labels = prompts::verdict_labels();
  CHECK(parse_verdict(R"({"reason": "better math", "prefered answer": "[[B]]"})", labels) ==
        verdict::b);
  CHECK(parse_verdict(R"(Sure! {"reason": "...", "prefered answer": "[[A]]"} done)", labels) ==
        verdict::a);
  CHECK(parse_verdict(R"({"judgment": "[[B]]"})", labels) == verdict::b);
  // bare field value without brackets
  CHECK(parse_verdict(R"({"prefered answer": "A"})", labels) == verdict::a);
  // the JSON field beats stray labels in the reason text
  CHECK(parse_verdict(
            R"({"reason": "[[B]] looked good at first", "prefered answer": "[[A]]"})", labels) ==
        verdict::a);
}

TEST_CASE("malformed verdicts raise data errors") {
  auto labels = prompts::verdict_labels();
  CHECK_THROWS_WITH_AS(parse_verdict("both are fine", labels),
                       doctest::Contains("no verdict label"), data_error);
  CHECK_THROWS_AS(parse_verdict("", labels), data_error);
  CHECK_THROWS_WITH_AS(parse_verdict(R"({"prefered answer": "[[A]] or [[B]]"})", labels),
                       doctest::Contains("conflicting"), data_error);
  CHECK_THROWS_AS(parse_verdict(R"({"prefered answer": "neither"})", labels), data_error);
}

TEST_CASE("tie and graded labels map through") {
  auto with_tie = prompts::verdict_labels(std::string("[[C]]"));
  CHECK(parse_verdict("hard call: [[C]]", with_tie) == verdict::tie);
  auto graded = prompts::verdict_labels(std::nullopt, true);
  CHECK(parse_verdict("verdict: [[A>>B]]", graded) == verdict::a);
  CHECK(parse_verdict("verdict: [[A=B]]", graded) == verdict::tie);
  CHECK(parse_verdict("verdict: [[B>A]]", graded) == verdict::b);
}

TEST_CASE("canonical mapping: double swap is the identity") {
  for (verdict v : {verdict::a, verdict::b, verdict::tie}) {
    CHECK(canonical_verdict(v, 0) == v);
    CHECK(canonical_verdict(canonical_verdict(v, 1), 1) == v);
  }
  CHECK(canonical_verdict(verdict::a, 1) == verdict::b);
  CHECK(canonical_verdict(verdict::tie, 1) == verdict::tie);
}

// ---------------------------------------------------------------------------
// cache digest
// ---------------------------------------------------------------------------

TEST_CASE("cache digests move when any request field moves") {
  ProviderConfig p;
  p.base_url = "http://host:1";
  p.model = "m";
  const std::string d0 = cache_digest(p, "prompt");
  CHECK(d0.size() == 64);
  CHECK(cache_digest(p, "prompt") == d0);
  CHECK(cache_digest(p, "prompt!") != d0);
  ProviderConfig q = p;
  q.model = "m2";
  CHECK(cache_digest(q, "prompt") != d0);
  q = p;
  q.base_url = "http://host:2";
  CHECK(cache_digest(q, "prompt") != d0);
  q = p;
  q.temperature = 0.7;
  CHECK(cache_digest(q, "prompt") != d0);
}

// ---------------------------------------------------------------------------
// chat against the mock provider
// ---------------------------------------------------------------------------

TEST_CASE("missing API key is an authentication error before any request") {
  sim::MockProvider mock({});
  ProviderConfig p = test_provider(mock);
  p.api_key_env = "LEAKSCOPE_DEFINITELY_UNSET_VAR";
  ::unsetenv("LEAKSCOPE_DEFINITELY_UNSET_VAR");
  try {
    chat(p, "hello");
    FAIL("expected provider_error");
  } catch (const provider_error& e) {
    CHECK(e.code() == provider_errc::authentication);
  }
  CHECK(mock.request_count() == 0);
}

TEST_CASE("cache-warm calls make zero network requests") {
  sim::MockProvider mock({});
  testutil::TempDir cache;
  ProviderConfig p = test_provider(mock);
  p.cache_dir = cache.path();

  std::string first = chat(p, "what is up");
  CHECK(first == "[[A]]");
  CHECK(mock.request_count() == 1);
  std::string digest = cache_digest(p, "what is up");
  CHECK(std::filesystem::exists(cache.file(digest + ".json")));

  std::string second = chat(p, "what is up");
  CHECK(second == first);
  CHECK(mock.request_count() == 1);

  std::string third = chat(p, "different prompt");
  CHECK(mock.request_count() == 2);
  CHECK(third == "[[A]]");
}

TEST_CASE("transient failures are retried with success on the third attempt") {
  sim::MockOptions opts;
  opts.behavior = sim::mock_behavior::scripted;
  opts.script = {"fail", "fail", "[[B]]"};
  sim::MockProvider mock(opts);
  ProviderConfig p = test_provider(mock);
  p.max_retries = 3;

  CHECK(chat(p, "x") == "[[B]]");
  CHECK(mock.request_count() == 3);
}

TEST_CASE("retries exhaust with a distinct error kind") {
  sim::MockOptions opts;
  opts.behavior = sim::mock_behavior::scripted;
  opts.script = {"fail"};
  sim::MockProvider mock(opts);
  ProviderConfig p = test_provider(mock);
  p.max_retries = 1;

  try {
    chat(p, "x");
    FAIL("expected provider_error");
  } catch (const provider_error& e) {
    CHECK(e.code() == provider_errc::exhausted_retries);
  }
  CHECK(mock.request_count() == 2);
}

TEST_CASE("non-retryable HTTP statuses fail immediately") {
  // A route the mock does not serve yields 404, which must not be retried.
  sim::MockProvider mock({});
  ProviderConfig p = test_provider(mock);
  p.base_url = mock.base_url() + "/missing";
  p.max_retries = 3;
  try {
    chat(p, "x");
    FAIL("expected provider_error");
  } catch (const provider_error& e) {
    CHECK(e.code() == provider_errc::http);
  }
  CHECK(mock.request_count() == 0);  // 404 comes from the server router
}

// ---------------------------------------------------------------------------
// judge_pair
// ---------------------------------------------------------------------------

namespace {

PromptItem question(const std::string& id = "q1") {
  PromptItem q;
  q.id = id;
  q.text = "Compare the two answers for " + id + ".";
  return q;
}

ResponseRecord response(const std::string& qid, const std::string& model) {
  ResponseRecord r;
  r.prompt_id = qid;
  r.model = model;
  r.text = "answer from " + model;
  return r;
}

}  // namespace

TEST_CASE("always-[[A]] judge with swap shows pure position bias as 0.5/0.5") {
  sim::MockProvider mock({});
  ProviderConfig p = test_provider(mock);
  auto registry = prompts::Registry::load(testutil::source_dir() / "templates");

  auto outcome = judge_pair(p, question(), response("q1", "m1"), response("q1", "m2"), true,
                            registry, prompts::verdict_labels());
  REQUIRE(outcome.records.size() == 2);
  CHECK(outcome.invalid.empty());
  CHECK(outcome.records[0].order_index == 0);
  CHECK(outcome.records[0].result == verdict::a);  // m1 won the canonical order
  CHECK(outcome.records[1].order_index == 1);
  CHECK(outcome.records[1].result == verdict::b);  // "A" in swapped order = m2

  auto [c1, c2] = metrics::compute_win_rates(outcome.records, {"m1", "m2"}, "judge-a");
  CHECK(c1.win_rate == 0.5);
  CHECK(c2.win_rate == 0.5);
}

TEST_CASE("appendix JSON verdict maps to the named side") {
  sim::MockOptions opts;
  opts.behavior = sim::mock_behavior::scripted;
  opts.script = {R"({"reason": "clearer", "prefered answer": "[[B]]"})"};
  sim::MockProvider mock(opts);
  ProviderConfig p = test_provider(mock);
  auto registry = prompts::Registry::load(testutil::source_dir() / "templates");

  auto outcome = judge_pair(p, question(), response("q1", "m1"), response("q1", "m2"), false,
                            registry, prompts::verdict_labels());
  REQUIRE(outcome.records.size() == 1);
  CHECK(outcome.records[0].result == verdict::b);
  CHECK(outcome.records[0].rationale == "clearer");
  CHECK(outcome.records[0].extra.at("temperature") == 0.0);
}

TEST_CASE("label-free prose becomes an invalid judgment, not a record") {
  sim::MockOptions opts;
  opts.behavior = sim::mock_behavior::scripted;
  opts.script = {"both answers look equally fine to me"};
  sim::MockProvider mock(opts);
  ProviderConfig p = test_provider(mock);
  auto registry = prompts::Registry::load(testutil::source_dir() / "templates");

  auto outcome = judge_pair(p, question(), response("q1", "m1"), response("q1", "m2"), false,
                            registry, prompts::verdict_labels());
  CHECK(outcome.records.empty());
  REQUIRE(outcome.invalid.size() == 1);
  CHECK(outcome.invalid[0].reason.find("no verdict label") != std::string::npos);
  CHECK(outcome.invalid[0].raw.find("equally fine") != std::string::npos);
}

// ---------------------------------------------------------------------------
// run_benchmark_judgments
// ---------------------------------------------------------------------------

namespace {

struct RunFixture {
  sim::SimConfig config;
  std::vector<PromptItem> questions;
  std::vector<ResponseRecord> responses_a;
  std::vector<ResponseRecord> responses_b;

  explicit RunFixture(long long n, uint64_t seed = 7) {
    config.bias = 0.8;
    config.n_questions = n;
    config.seed = seed;
    questions = sim::make_questions(config);
    responses_a = sim::make_responses(config, sim::kStudentA);
    responses_b = sim::make_responses(config, sim::kStudentB);
  }
};

}  // namespace

TEST_CASE("zero questions produce an empty artifact and succeed") {
  RunFixture fx(0);
  sim::MockOptions opts;
  opts.behavior = sim::mock_behavior::sim_judge;
  opts.sim = fx.config;
  sim::MockProvider mock(opts);
  testutil::TempDir tmp;

  auto stats = run_benchmark_judgments(fx.questions, fx.responses_a, fx.responses_b,
                                       test_provider(mock), {}, tmp.file("out.jsonl"),
                                       prompts::Registry::load(testutil::source_dir() / "templates"));
  CHECK(stats.questions == 0);
  CHECK(stats.records == 0);
  CHECK(testutil::slurp(tmp.file("out.jsonl")).empty());
}

TEST_CASE("two fresh runs produce byte-identical judgment files") {
  RunFixture fx(30);
  sim::MockOptions opts;
  opts.behavior = sim::mock_behavior::sim_judge;
  opts.sim = fx.config;
  sim::MockProvider mock(opts);
  auto registry = prompts::Registry::load(testutil::source_dir() / "templates");
  testutil::TempDir tmp;

  ProviderConfig p = test_provider(mock);
  p.max_concurrency = 8;
  run_benchmark_judgments(fx.questions, fx.responses_a, fx.responses_b, p, {},
                          tmp.file("one.jsonl"), registry);
  run_benchmark_judgments(fx.questions, fx.responses_a, fx.responses_b, p, {},
                          tmp.file("two.jsonl"), registry);
  const std::string one = testutil::slurp(tmp.file("one.jsonl"));
  CHECK_FALSE(one.empty());
  CHECK(one == testutil::slurp(tmp.file("two.jsonl")));
}

TEST_CASE("interrupted runs resume by requesting only the missing half") {
  RunFixture fx(20);
  sim::MockOptions opts;
  opts.behavior = sim::mock_behavior::sim_judge;
  opts.sim = fx.config;
  sim::MockProvider mock(opts);
  auto registry = prompts::Registry::load(testutil::source_dir() / "templates");
  testutil::TempDir tmp;
  testutil::TempDir cache;

  ProviderConfig p = test_provider(mock);
  p.cache_dir = cache.path();

  // First half only (simulates an interrupted run whose cache survived).
  std::vector<PromptItem> half(fx.questions.begin(), fx.questions.begin() + 10);
  run_benchmark_judgments(half, fx.responses_a, fx.responses_b, p, {}, tmp.file("half.jsonl"),
                          registry);
  CHECK(mock.request_count() == 20);  // 10 questions x 2 orders

  auto stats = run_benchmark_judgments(fx.questions, fx.responses_a, fx.responses_b, p, {},
                                       tmp.file("full.jsonl"), registry);
  CHECK(mock.request_count() == 40);  // only the missing 10 x 2 were requested
  CHECK(stats.records == 40);
}

TEST_CASE("in-flight requests never exceed the configured bound") {
  RunFixture fx(12);
  sim::MockOptions opts;
  opts.behavior = sim::mock_behavior::sim_judge;
  opts.sim = fx.config;
  opts.response_delay_ms = 25;
  sim::MockProvider mock(opts);
  auto registry = prompts::Registry::load(testutil::source_dir() / "templates");
  testutil::TempDir tmp;

  ProviderConfig p = test_provider(mock);
  p.max_concurrency = 3;
  run_benchmark_judgments(fx.questions, fx.responses_a, fx.responses_b, p, {},
                          tmp.file("out.jsonl"), registry);
  CHECK(mock.max_in_flight() <= 3);
  CHECK(mock.max_in_flight() >= 2);  // the pool actually ran concurrently
}

TEST_CASE("coverage gaps fail fast unless allow_partial") {
  RunFixture fx(5);
  fx.responses_b.pop_back();
  sim::MockOptions opts;
  opts.behavior = sim::mock_behavior::sim_judge;
  opts.sim = fx.config;
  sim::MockProvider mock(opts);
  auto registry = prompts::Registry::load(testutil::source_dir() / "templates");
  testutil::TempDir tmp;

  CHECK_THROWS_WITH_AS(
      run_benchmark_judgments(fx.questions, fx.responses_a, fx.responses_b, test_provider(mock),
                              {}, tmp.file("out.jsonl"), registry),
      doctest::Contains("coverage gap"), data_error);

  RunOptions allow;
  allow.allow_partial = true;
  auto stats = run_benchmark_judgments(fx.questions, fx.responses_a, fx.responses_b,
                                       test_provider(mock), allow, tmp.file("out.jsonl"),
                                       registry);
  CHECK(stats.questions == 4);
  CHECK(stats.records == 8);
}

TEST_CASE("artifact order is sorted by prompt then order index") {
  RunFixture fx(6);
  sim::MockOptions opts;
  opts.behavior = sim::mock_behavior::sim_judge;
  opts.sim = fx.config;
  sim::MockProvider mock(opts);
  auto registry = prompts::Registry::load(testutil::source_dir() / "templates");
  testutil::TempDir tmp;

  ProviderConfig p = test_provider(mock);
  p.max_concurrency = 4;  // completion order will interleave
  run_benchmark_judgments(fx.questions, fx.responses_a, fx.responses_b, p, {},
                          tmp.file("out.jsonl"), registry);
  auto records = read_jsonl<JudgmentRecord>(tmp.file("out.jsonl"));
  REQUIRE(records.size() == 12);
  for (size_t i = 1; i < records.size(); ++i) {
    auto prev = std::tie(records[i - 1].prompt_id, records[i - 1].order_index);
    auto cur = std::tie(records[i].prompt_id, records[i].order_index);
    CHECK(prev < cur);
  }
}
