#include "leakscope/simulator.hpp"

#include <cmath>
#include <cstdio>
#include <regex>
#include <thread>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "leakscope/orchestrator.hpp"
#include "leakscope/rng.hpp"

namespace leakscope::sim {

void SimConfig::validate() const {
  if (bias < 0.0) throw data_error("bias must be >= 0");
  if (tau <= 0.0) throw data_error("tau must be > 0");
  if (mix_fraction < 0.0 || mix_fraction > 1.0)
    throw data_error("mix_fraction must be in [0, 1]");
  if (n_questions < 0) throw data_error("n_questions must be >= 0");
  for (const auto& [cat, mult] : category_bias)
    if (mult < 0.0) throw data_error("category multiplier for \"" + cat + "\" must be >= 0");
}

void to_json(json& j, const SimConfig& c) {
  j = json{{"bias", c.bias},
           {"tau", c.tau},
           {"mix_fraction", c.mix_fraction},
           {"n_questions", c.n_questions},
           {"seed", c.seed},
           {"unrelated_judges", c.unrelated_judges},
           {"category_bias", c.category_bias}};
}

std::pair<std::string, std::string> judge_pair_ids(const SimConfig& config) {
  if (config.unrelated_judges) return {kJudgeC, kJudgeD};
  return {kJudgeA, kJudgeB};
}

std::string question_id(long long index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "simq-%06lld", index);
  return buf;
}

namespace {

long long question_index(const std::string& qid) {
  if (qid.rfind("simq-", 0) != 0) throw data_error("not a simulator question id: " + qid);
  return std::stoll(qid.substr(5));
}

// Generator fingerprint each model carries; judges favor students whose
// fingerprint matches their own.
std::string fingerprint_of(const std::string& model) {
  if (model == kStudentA || model == kJudgeA) return "gen-a";
  if (model == kStudentB || model == kJudgeB) return "gen-b";
  if (model == kJudgeC) return "gen-c";
  if (model == kJudgeD) return "gen-d";
  throw data_error("unknown simulator model \"" + model + "\"");
}

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

std::optional<std::string> question_category(const SimConfig& config, long long index) {
  if (config.category_bias.empty()) return std::nullopt;
  std::vector<std::string> cats;
  cats.reserve(config.category_bias.size());
  for (const auto& [cat, _] : config.category_bias) cats.push_back(cat);
  rng::Stream stream(rng::key({config.seed, rng::hash_str("category"),
                               static_cast<uint64_t>(index)}));
  return cats[stream.next_below(cats.size())];
}

double fingerprint_affinity(const SimConfig& config, const std::string& judge,
                            const std::string& student) {
  return fingerprint_of(judge) == fingerprint_of(student) ? config.mix_fraction : 0.0;
}

double first_wins_probability(const SimConfig& config, const std::string& qid,
                              const std::string& judge, const std::string& first,
                              const std::string& second) {
  double mult = 1.0;
  if (auto cat = question_category(config, question_index(qid)))
    mult = config.category_bias.at(*cat);
  const double delta = config.bias * mult *
                       (fingerprint_affinity(config, judge, first) -
                        fingerprint_affinity(config, judge, second));
  return logistic(delta / config.tau);
}

verdict sim_verdict(const SimConfig& config, const std::string& qid, const std::string& judge,
                    const std::string& first, const std::string& second, int order_index) {
  const double p = first_wins_probability(config, qid, judge, first, second);
  rng::Stream stream(rng::key({config.seed, rng::hash_str("verdict"), rng::hash_str(qid),
                               rng::hash_str(judge), static_cast<uint64_t>(order_index)}));
  return stream.next_uniform01() < p ? verdict::a : verdict::b;
}

std::string sim_completion(verdict presented) {
  json j{{"reason", "synthetic verdict"},
         {"prefered answer", presented == verdict::a ? "[[A]]" : "[[B]]"}};
  return j.dump();
}

// ---------------------------------------------------------------------------
// Dataset materialization
// ---------------------------------------------------------------------------

std::vector<PromptItem> make_questions(const SimConfig& config) {
  config.validate();
  std::vector<PromptItem> out;
  out.reserve(static_cast<size_t>(config.n_questions));
  for (long long i = 0; i < config.n_questions; ++i) {
    PromptItem p;
    p.id = question_id(i);
    p.text = "Simulated instruction " + p.id + ": write a short answer in your usual style.";
    p.question_type = question_category(config, i);
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<ResponseRecord> make_responses(const SimConfig& config, const std::string& student) {
  config.validate();
  fingerprint_of(student);  // id check
  std::vector<ResponseRecord> out;
  out.reserve(static_cast<size_t>(config.n_questions));
  for (long long i = 0; i < config.n_questions; ++i) {
    ResponseRecord r;
    r.prompt_id = question_id(i);
    r.model = student;
    r.text = "[model=" + student + "] Synthetic answer to " + r.prompt_id + ".";
    out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Direct experiment path
// ---------------------------------------------------------------------------

std::vector<JudgmentRecord> generate_judgments(const SimConfig& config) {
  config.validate();
  const auto judges = judge_pair_ids(config);
  std::vector<JudgmentRecord> out;
  out.reserve(static_cast<size_t>(config.n_questions) * 4);
  for (long long i = 0; i < config.n_questions; ++i) {
    const std::string qid = question_id(i);
    for (const std::string& judge : {judges.first, judges.second}) {
      for (int order = 0; order < 2; ++order) {
        const std::string& first = order == 0 ? kStudentA : kStudentB;
        const std::string& second = order == 0 ? kStudentB : kStudentA;
        const verdict presented = sim_verdict(config, qid, judge, first, second, order);
        JudgmentRecord rec;
        rec.prompt_id = qid;
        rec.judge = judge;
        rec.model_a = kStudentA;
        rec.model_b = kStudentB;
        rec.order_index = order;
        rec.result = orchestrator::canonical_verdict(presented, order);
        rec.rationale = "synthetic verdict";
        rec.raw = sim_completion(presented);
        out.push_back(std::move(rec));
      }
    }
  }
  return out;
}

double oracle_pls(const SimConfig& config) {
  config.validate();
  const auto judges = judge_pair_ids(config);
  // Expected win rate of student-a under the first judge, averaged over the
  // (uniform) category distribution; by symmetry AVG = 1/2 and Eq. 4
  // collapses to 2*E[s] - 1.
  const double aff_gap = fingerprint_affinity(config, judges.first, kStudentA) -
                         fingerprint_affinity(config, judges.first, kStudentB);
  double mean_win = 0.0;
  if (config.category_bias.empty()) {
    mean_win = logistic(config.bias * aff_gap / config.tau);
  } else {
    for (const auto& [_, mult] : config.category_bias)
      mean_win += logistic(config.bias * mult * aff_gap / config.tau);
    mean_win /= static_cast<double>(config.category_bias.size());
  }
  return 2.0 * mean_win - 1.0;
}

std::map<std::string, double> oracle_pls_by_category(const SimConfig& config) {
  std::map<std::string, double> out;
  const auto judges = judge_pair_ids(config);
  const double aff_gap = fingerprint_affinity(config, judges.first, kStudentA) -
                         fingerprint_affinity(config, judges.first, kStudentB);
  for (const auto& [cat, mult] : config.category_bias)
    out[cat] = 2.0 * logistic(config.bias * mult * aff_gap / config.tau) - 1.0;
  return out;
}

SimOutcome run_leakage_experiment(const SimConfig& config, int bootstrap_resamples) {
  SimOutcome outcome;
  outcome.questions = make_questions(config);
  outcome.judgments = generate_judgments(config);

  metrics::PairSpec pair{{kStudentA, kStudentB}, judge_pair_ids(config)};
  outcome.pls = metrics::compute_pls_for_pair(outcome.judgments, pair);
  if (bootstrap_resamples > 0)
    outcome.pls.ci95 =
        metrics::bootstrap_ci(outcome.judgments, pair, bootstrap_resamples, config.seed);
  outcome.oracle = oracle_pls(config);
  outcome.oracle_by_category = oracle_pls_by_category(config);
  return outcome;
}

json sim_report_json(const SimConfig& config, const SimOutcome& outcome) {
  json j{{"config", config},
         {"empirical_pls", outcome.pls.pls},
         {"oracle_pls", outcome.oracle},
         {"pls_report", metrics::pls_report_json(outcome.pls, metrics::tie_policy::half_credit)}};
  j["ci95"] = outcome.pls.ci95
                  ? json::array({outcome.pls.ci95->first, outcome.pls.ci95->second})
                  : json(nullptr);
  if (!outcome.oracle_by_category.empty()) j["oracle_by_category"] = outcome.oracle_by_category;
  return j;
}

// ---------------------------------------------------------------------------
// Mock provider
// ---------------------------------------------------------------------------

struct MockProvider::Impl {
  MockOptions options;
  httplib::Server server;
  std::thread thread;
};

namespace {

std::string completion_envelope(const std::string& content) {
  json j{{"choices",
          json::array({json{{"message", json{{"role", "assistant"}, {"content", content}}}}})}};
  return j.dump();
}

std::string block_between(const std::string& text, const std::string& begin,
                          const std::string& end) {
  size_t b = text.find(begin);
  if (b == std::string::npos) throw data_error("marker not found: " + begin);
  b += begin.size();
  size_t e = text.find(end, b);
  if (e == std::string::npos) throw data_error("marker not found: " + end);
  return text.substr(b, e - b);
}

std::string model_marker(const std::string& block) {
  static const std::regex re(R"(\[model=([^\]]+)\])");
  std::smatch m;
  if (!std::regex_search(block, m, re))
    throw data_error("no [model=...] marker in simulated response block");
  return m[1].str();
}

std::string sim_judge_reply(const SimConfig& config, const json& body) {
  const std::string judge = body.at("model").get<std::string>();
  const std::string prompt = body.at("messages").at(0).at("content").get<std::string>();

  static const std::regex qid_re(R"(simq-\d+)");
  std::smatch m;
  if (!std::regex_search(prompt, m, qid_re))
    throw data_error("no simulator question id in prompt");
  const std::string qid = m.str();

  const std::string first = model_marker(
      block_between(prompt, "[The Start of Assistant A's Answer]", "[The End of Assistant A's Answer]"));
  const std::string second = model_marker(
      block_between(prompt, "[The Start of Assistant B's Answer]", "[The End of Assistant B's Answer]"));
  const int order = first == kStudentA ? 0 : 1;
  return sim_completion(sim_verdict(config, qid, judge, first, second, order));
}

std::string echo_truth_reply(const std::string& prompt) {
  const std::string marker = "[[TRUTH=";
  size_t b = prompt.find(marker);
  if (b == std::string::npos) return "no truth marker present";
  b += marker.size();
  size_t e = prompt.find("]]", b);
  if (e == std::string::npos) return "no truth marker present";
  json j{{"reason", "echo"}, {"judgment", prompt.substr(b, e - b)}};
  return j.dump();
}

}  // namespace

MockProvider::MockProvider(MockOptions options) : impl_(std::make_unique<Impl>()) {
  impl_->options = std::move(options);

  impl_->server.Post("/chat/completions", [this](const httplib::Request& req,
                                                 httplib::Response& res) {
    requests_.fetch_add(1);
    int now = in_flight_.fetch_add(1) + 1;
    int prev = max_in_flight_.load();
    while (now > prev && !max_in_flight_.compare_exchange_weak(prev, now)) {
    }
    if (impl_->options.response_delay_ms > 0)
      std::this_thread::sleep_for(std::chrono::milliseconds(impl_->options.response_delay_ms));

    try {
      const json body = json::parse(req.body);
      std::string content;
      switch (impl_->options.behavior) {
        case mock_behavior::always_a: content = "[[A]]"; break;
        case mock_behavior::echo_truth:
          content = echo_truth_reply(body.at("messages").at(0).at("content").get<std::string>());
          break;
        case mock_behavior::scripted: {
          const auto& script = impl_->options.script;
          if (script.empty()) throw data_error("scripted mock has an empty script");
          size_t i = std::min(script_pos_.fetch_add(1), script.size() - 1);
          if (script[i] == "fail") {
            res.status = 500;
            res.set_content("scripted failure", "text/plain");
            in_flight_.fetch_sub(1);
            return;
          }
          content = script[i];
          break;
        }
        case mock_behavior::sim_judge:
          content = sim_judge_reply(impl_->options.sim, body);
          break;
      }
      res.set_content(completion_envelope(content), "application/json");
    } catch (const std::exception& e) {
      res.status = 400;
      res.set_content(std::string("mock provider error: ") + e.what(), "text/plain");
    }
    in_flight_.fetch_sub(1);
  });

  port_ = impl_->server.bind_to_any_port("127.0.0.1");
  if (port_ <= 0) throw provider_error(provider_errc::http, "mock provider failed to bind a port");
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

MockProvider::~MockProvider() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

void MockProvider::reset_counters() {
  requests_.store(0);
  in_flight_.store(0);
  max_in_flight_.store(0);
  script_pos_.store(0);
}

}  // namespace leakscope::sim
