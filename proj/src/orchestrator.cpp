#include "leakscope/orchestrator.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <mutex>
#include <set>
#include <thread>
#include <tuple>

#include <unistd.h>

#include <httplib.h>
#include <openssl/evp.h>
#include <spdlog/spdlog.h>

namespace leakscope::orchestrator {

void ProviderConfig::validate() const {
  if (base_url.empty()) throw usage_error("provider base_url is empty");
  if (model.empty()) throw usage_error("provider model is empty");
  if (max_concurrency < 1) throw usage_error("max_concurrency must be >= 1");
  if (temperature < 0.0) throw usage_error("temperature must be >= 0");
  if (max_retries < 0) throw usage_error("max_retries must be >= 0");
}

// ---------------------------------------------------------------------------
// Cache
// ---------------------------------------------------------------------------

std::string cache_digest(const ProviderConfig& provider, const std::string& prompt) {
  json payload{{"base_url", provider.base_url},
               {"model", provider.model},
               {"prompt", prompt},
               {"temperature", provider.temperature}};
  const std::string bytes = payload.dump();

  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr);

  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 0xf];
  }
  return out;
}

namespace {

std::optional<std::string> cache_lookup(const ProviderConfig& provider,
                                        const std::string& digest) {
  if (!provider.cache_dir) return std::nullopt;
  std::filesystem::path file = *provider.cache_dir / (digest + ".json");
  std::error_code ec;
  if (!std::filesystem::exists(file, ec)) return std::nullopt;
  try {
    json j = read_json_file(file);
    return j.at("response").get<std::string>();
  } catch (const std::exception& e) {
    spdlog::warn("ignoring unreadable cache entry {}: {}", file.string(), e.what());
    return std::nullopt;
  }
}

void cache_store(const ProviderConfig& provider, const std::string& digest,
                 const std::string& prompt, const std::string& response) {
  if (!provider.cache_dir) return;
  std::filesystem::create_directories(*provider.cache_dir);
  json j{{"digest", digest},
         {"request",
          {{"base_url", provider.base_url},
           {"model", provider.model},
           {"prompt", prompt},
           {"temperature", provider.temperature}}},
         {"response", response},
         {"timestamp", static_cast<long long>(std::chrono::duration_cast<std::chrono::seconds>(
                           std::chrono::system_clock::now().time_since_epoch())
                           .count())}};

  static std::atomic<unsigned> tmp_counter{0};
  std::filesystem::path tmp =
      *provider.cache_dir /
      (digest + ".tmp-" + std::to_string(::getpid()) + "-" + std::to_string(tmp_counter++));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << j.dump();
    if (!out) throw data_error("cannot write cache entry " + tmp.string());
  }
  // rename is atomic within the directory; concurrent writers both produce
  // the same content, whichever lands last.
  std::filesystem::rename(tmp, *provider.cache_dir / (digest + ".json"));
}

struct ParsedUrl {
  std::string host_part;  // scheme://host[:port], what httplib::Client takes
  std::string path_prefix;
};

ParsedUrl parse_base_url(const std::string& base_url) {
  auto scheme_end = base_url.find("://");
  if (scheme_end == std::string::npos)
    throw usage_error("base_url must start with http:// or https://: " + base_url);
  auto path_start = base_url.find('/', scheme_end + 3);
  ParsedUrl out;
  if (path_start == std::string::npos) {
    out.host_part = base_url;
  } else {
    out.host_part = base_url.substr(0, path_start);
    out.path_prefix = base_url.substr(path_start);
  }
  while (!out.path_prefix.empty() && out.path_prefix.back() == '/') out.path_prefix.pop_back();
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// chat
// ---------------------------------------------------------------------------

std::string chat(const ProviderConfig& provider, const std::string& prompt,
                 const ChatOptions& opts) {
  provider.validate();
  if (prompt.empty()) throw usage_error("prompt is empty");

  std::string api_key;
  if (!provider.api_key_env.empty()) {
    const char* key = std::getenv(provider.api_key_env.c_str());
    if (!key || !*key)
      throw provider_error(provider_errc::authentication,
                           "API key environment variable " + provider.api_key_env + " is not set");
    api_key = key;
  }

  const std::string digest = cache_digest(provider, prompt);
  if (!opts.bypass_cache) {
    if (auto cached = cache_lookup(provider, digest)) return *cached;
  }

  const ParsedUrl url = parse_base_url(provider.base_url);
  const json body{{"model", provider.model},
                  {"messages", json::array({json{{"role", "user"}, {"content", prompt}}})},
                  {"temperature", provider.temperature}};
  const std::string body_str = body.dump();

  std::string last_failure = "no attempt made";
  bool last_was_timeout = false;

  for (int attempt = 0; attempt <= provider.max_retries; ++attempt) {
    if (attempt > 0) {
      auto delay = provider.retry_backoff * (1LL << (attempt - 1));
      spdlog::debug("retrying chat in {} ms (attempt {}/{})", delay.count(), attempt + 1,
                    provider.max_retries + 1);
      std::this_thread::sleep_for(delay);
    }

    httplib::Client client(url.host_part);
    client.set_connection_timeout(provider.timeout);
    client.set_read_timeout(provider.timeout);
    client.set_write_timeout(provider.timeout);
    httplib::Headers headers;
    if (!api_key.empty()) headers.emplace("Authorization", "Bearer " + api_key);

    auto res = client.Post(url.path_prefix + "/chat/completions", headers, body_str,
                           "application/json");
    if (!res) {
      last_was_timeout = res.error() == httplib::Error::ConnectionTimeout;
      last_failure = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 401 || res->status == 403)
      throw provider_error(provider_errc::authentication,
                           "authentication rejected (HTTP " + std::to_string(res->status) + ")");
    if (res->status == 429 || res->status >= 500) {
      last_was_timeout = false;
      last_failure = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200)
      throw provider_error(provider_errc::http,
                           "HTTP " + std::to_string(res->status) + ": " + res->body);

    json reply = json::parse(res->body, nullptr, false);
    if (reply.is_discarded() || !reply.contains("choices") || reply["choices"].empty() ||
        !reply["choices"][0].contains("message"))
      throw provider_error(provider_errc::malformed_response,
                           "completion response lacks choices[0].message.content");
    std::string content = reply["choices"][0]["message"].value("content", std::string());

    cache_store(provider, digest, prompt, content);
    return content;
  }

  if (last_was_timeout)
    throw provider_error(provider_errc::timeout,
                         "request timed out after " + std::to_string(provider.max_retries + 1) +
                             " attempts");
  throw provider_error(provider_errc::exhausted_retries,
                       "retries exhausted after " + std::to_string(provider.max_retries + 1) +
                           " attempts; last failure: " + last_failure);
}

// ---------------------------------------------------------------------------
// Verdict parsing
// ---------------------------------------------------------------------------

namespace {

struct LabelHit {
  size_t pos;
  size_t len;
  verdict v;
};

std::vector<LabelHit> find_labels(const std::string& text, const prompts::VerdictLabels& labels) {
  std::vector<LabelHit> hits;
  for (const auto& [label, v] : labels.entries) {
    size_t pos = text.find(label);
    while (pos != std::string::npos) {
      hits.push_back({pos, label.size(), v});
      pos = text.find(label, pos + 1);
    }
  }
  std::sort(hits.begin(), hits.end(), [](const LabelHit& a, const LabelHit& b) {
    return a.pos != b.pos ? a.pos < b.pos : a.len < b.len;
  });
  return hits;
}

std::string strip_brackets(const std::string& label) {
  size_t begin = label.find_first_not_of("[");
  size_t end = label.find_last_not_of("]");
  if (begin == std::string::npos || end < begin) return label;
  return label.substr(begin, end - begin + 1);
}

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::optional<json> try_parse_object(const std::string& raw) {
  json j = json::parse(trim(raw), nullptr, false);
  if (!j.is_discarded() && j.is_object()) return j;
  size_t open = raw.find('{');
  size_t close = raw.rfind('}');
  if (open == std::string::npos || close == std::string::npos || close <= open)
    return std::nullopt;
  j = json::parse(raw.substr(open, close - open + 1), nullptr, false);
  if (!j.is_discarded() && j.is_object()) return j;
  return std::nullopt;
}

}  // namespace

verdict parse_verdict(const std::string& raw, const prompts::VerdictLabels& labels) {
  if (auto obj = try_parse_object(raw)) {
    for (const char* field : {"prefered answer", "preferred answer", "judgment"}) {
      auto it = obj->find(field);
      if (it == obj->end() || !it->is_string()) continue;
      const std::string value = it->get<std::string>();

      std::vector<LabelHit> hits = find_labels(value, labels);
      std::set<verdict> distinct;
      for (const LabelHit& h : hits) distinct.insert(h.v);
      if (distinct.size() > 1)
        throw data_error("conflicting verdict labels in judge JSON field \"" +
                         std::string(field) + "\"");
      if (distinct.size() == 1) return *distinct.begin();

      // Bare form, e.g. "A" instead of "[[A]]".
      const std::string bare = trim(value);
      for (const auto& [label, v] : labels.entries)
        if (bare == strip_brackets(label)) return v;
    }
  }

  std::vector<LabelHit> hits = find_labels(raw, labels);
  if (hits.empty()) throw data_error("no verdict label found in judge output");
  return hits.back().v;
}

verdict canonical_verdict(verdict presented, int order_index) {
  if (order_index == 0 || presented == verdict::tie) return presented;
  return presented == verdict::a ? verdict::b : verdict::a;
}

// ---------------------------------------------------------------------------
// Pairwise judging
// ---------------------------------------------------------------------------

namespace {

JudgmentRecord make_record(const ProviderConfig& judge, const std::string& judge_id,
                           const PromptItem& question, const ResponseRecord& resp_a,
                           const ResponseRecord& resp_b, int order_index, verdict canonical,
                           const std::string& rationale, const std::string& raw) {
  JudgmentRecord rec;
  rec.prompt_id = question.id;
  rec.judge = judge_id.empty() ? judge.model : judge_id;
  rec.model_a = resp_a.model;
  rec.model_b = resp_b.model;
  rec.order_index = order_index;
  rec.result = canonical;
  rec.rationale = rationale;
  rec.raw = raw;
  rec.extra["temperature"] = judge.temperature;
  return rec;
}

std::string extract_rationale(const std::string& raw) {
  if (auto obj = try_parse_object(raw)) {
    auto it = obj->find("reason");
    if (it != obj->end() && it->is_string()) return it->get<std::string>();
  }
  return {};
}

}  // namespace

JudgePairOutcome judge_pair(const ProviderConfig& judge, const PromptItem& question,
                            const ResponseRecord& resp_a, const ResponseRecord& resp_b, bool swap,
                            const prompts::Registry& registry,
                            const prompts::VerdictLabels& labels, const std::string& judge_id) {
  if (resp_a.prompt_id != question.id || resp_b.prompt_id != question.id)
    throw data_error("responses do not belong to question " + question.id);
  if (resp_a.model == resp_b.model)
    throw data_error("pair must come from distinct models, both are \"" + resp_a.model + "\"");

  JudgePairOutcome outcome;
  const int n_orders = swap ? 2 : 1;
  for (int order = 0; order < n_orders; ++order) {
    const ResponseRecord& first = order == 0 ? resp_a : resp_b;
    const ResponseRecord& second = order == 0 ? resp_b : resp_a;
    std::string prompt = registry.render(prompts::template_id::pairwise_judgment,
                                         {{"[INSTRUCTION]", question.text},
                                          {"[RESPONSE A]", first.text},
                                          {"[RESPONSE B]", second.text}});
    std::string raw = chat(judge, prompt);
    try {
      verdict presented = parse_verdict(raw, labels);
      outcome.records.push_back(make_record(judge, judge_id, question, resp_a, resp_b, order,
                                            canonical_verdict(presented, order),
                                            extract_rationale(raw), raw));
    } catch (const data_error& e) {
      spdlog::warn("invalid judgment for {} (order {}): {}", question.id, order, e.what());
      outcome.invalid.push_back({question.id, order, raw, e.what()});
    }
  }
  return outcome;
}

// ---------------------------------------------------------------------------
// parallel_for
// ---------------------------------------------------------------------------

void parallel_for(size_t n, int max_concurrency, const std::function<void(size_t)>& fn) {
  if (n == 0) return;
  const size_t workers = std::min<size_t>(std::max(max_concurrency, 1), n);
  if (workers == 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }

  std::atomic<size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::mutex error_mutex;

  auto worker = [&] {
    while (!failed.load(std::memory_order_relaxed)) {
      size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        failed.store(true, std::memory_order_relaxed);
        return;
      }
    }
  };

  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (size_t w = 0; w < workers; ++w) threads.emplace_back(worker);
  for (std::thread& t : threads) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

// ---------------------------------------------------------------------------
// Benchmark runner
// ---------------------------------------------------------------------------

RunStats run_benchmark_judgments(std::span<const PromptItem> questions,
                                 std::span<const ResponseRecord> responses_a,
                                 std::span<const ResponseRecord> responses_b,
                                 const ProviderConfig& judge, const RunOptions& options,
                                 const std::filesystem::path& out_path,
                                 const prompts::Registry& registry) {
  judge.validate();

  auto index_responses = [](std::span<const ResponseRecord> responses, const char* which) {
    std::map<std::string, const ResponseRecord*> byid;
    for (const ResponseRecord& r : responses)
      if (!byid.emplace(r.prompt_id, &r).second)
        throw data_error(std::string("duplicate response for prompt \"") + r.prompt_id +
                         "\" in " + which + " set");
    return byid;
  };
  auto by_a = index_responses(responses_a, "first");
  auto by_b = index_responses(responses_b, "second");

  std::vector<const PromptItem*> covered;
  for (const PromptItem& q : questions) {
    const bool have = by_a.count(q.id) && by_b.count(q.id);
    if (have) {
      covered.push_back(&q);
    } else if (!options.allow_partial) {
      throw data_error("coverage gap: no response pair for question \"" + q.id +
                       "\" (use allow_partial to judge the covered subset)");
    }
  }

  struct Task {
    const PromptItem* question;
    int order;
  };
  std::vector<Task> tasks;
  for (const PromptItem* q : covered) {
    tasks.push_back({q, 0});
    if (options.swap) tasks.push_back({q, 1});
  }

  std::vector<std::optional<JudgmentRecord>> results(tasks.size());
  std::vector<std::optional<InvalidJudgment>> invalids(tasks.size());
  const std::string judge_id = options.judge_id.empty() ? judge.model : options.judge_id;

  parallel_for(tasks.size(), judge.max_concurrency, [&](size_t i) {
    const Task& task = tasks[i];
    const ResponseRecord& resp_a = *by_a.at(task.question->id);
    const ResponseRecord& resp_b = *by_b.at(task.question->id);
    const ResponseRecord& first = task.order == 0 ? resp_a : resp_b;
    const ResponseRecord& second = task.order == 0 ? resp_b : resp_a;
    std::string prompt = registry.render(prompts::template_id::pairwise_judgment,
                                         {{"[INSTRUCTION]", task.question->text},
                                          {"[RESPONSE A]", first.text},
                                          {"[RESPONSE B]", second.text}});
    std::string raw = chat(judge, prompt);
    try {
      verdict presented = parse_verdict(raw, options.labels);
      results[i] = make_record(judge, judge_id, *task.question, resp_a, resp_b, task.order,
                               canonical_verdict(presented, task.order), extract_rationale(raw),
                               raw);
    } catch (const data_error& e) {
      spdlog::warn("invalid judgment for {} (order {}): {}", task.question->id, task.order,
                   e.what());
      invalids[i] = InvalidJudgment{task.question->id, task.order, raw, e.what()};
    }
  });

  std::vector<JudgmentRecord> records;
  RunStats stats;
  stats.questions = covered.size();
  for (auto& r : results)
    if (r) records.push_back(std::move(*r));
  for (auto& inv : invalids)
    if (inv) ++stats.invalid;

  std::sort(records.begin(), records.end(), [](const JudgmentRecord& a, const JudgmentRecord& b) {
    return std::tie(a.prompt_id, a.order_index) < std::tie(b.prompt_id, b.order_index);
  });
  write_jsonl(out_path, records);
  stats.records = records.size();
  if (stats.invalid > 0)
    spdlog::warn("{} judgment(s) were invalid and excluded from {}", stats.invalid,
                 out_path.string());
  return stats;
}

}  // namespace leakscope::orchestrator
