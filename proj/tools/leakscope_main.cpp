// leakscope: desk-scale audit toolkit for preference leakage in
// LLM-as-a-judge pipelines. Subcommands cover dataset validation, pairwise
// judging, PLS computation, recognition probes, category analyses,
// experiment planning, the validation simulator, and report rendering.

#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "leakscope/analyses.hpp"
#include "leakscope/core.hpp"
#include "leakscope/metrics.hpp"
#include "leakscope/orchestrator.hpp"
#include "leakscope/planner.hpp"
#include "leakscope/prompts.hpp"
#include "leakscope/report.hpp"
#include "leakscope/run_config.hpp"
#include "leakscope/simulator.hpp"

namespace lk = leakscope;
using lk::json;

namespace {

struct GlobalOptions {
  std::string config_path;
  bool json_output = false;
  std::optional<int64_t> seed;
  std::optional<std::string> cache_dir;
  std::string log_level = "info";
};

struct ProviderFlags {
  std::string provider_name;  // look up in the config file
  std::string url;
  std::string model;
  std::string api_key_env;
  double temperature = 0.0;
  int concurrency = 4;
  long long timeout_ms = 30000;
  int max_retries = 3;
  long long backoff_ms = 500;
  std::string cache_dir;
};

void add_provider_flags(CLI::App* cmd, ProviderFlags& f) {
  cmd->add_option("--provider", f.provider_name, "provider name from the config file");
  cmd->add_option("--provider-url", f.url, "chat-completion base URL");
  cmd->add_option("--judge-model", f.model, "model name sent to the provider");
  cmd->add_option("--api-key-env", f.api_key_env, "env var holding the API key");
  cmd->add_option("--temperature", f.temperature, "sampling temperature (default 0)");
  cmd->add_option("--concurrency", f.concurrency, "max in-flight requests");
  cmd->add_option("--timeout-ms", f.timeout_ms, "per-request timeout");
  cmd->add_option("--max-retries", f.max_retries, "extra attempts after the first");
  cmd->add_option("--backoff-ms", f.backoff_ms, "initial retry backoff");
  cmd->add_option("--cache-dir", f.cache_dir, "response cache directory");
}

lk::orchestrator::ProviderConfig resolve_provider(const ProviderFlags& f,
                                                  const lk::RunConfig& cfg,
                                                  const GlobalOptions& global,
                                                  const CLI::App* cmd) {
  lk::orchestrator::ProviderConfig p;
  if (!f.provider_name.empty()) p = cfg.provider(f.provider_name);
  if (cmd->count("--provider-url")) p.base_url = f.url;
  if (cmd->count("--judge-model")) p.model = f.model;
  if (cmd->count("--api-key-env")) p.api_key_env = f.api_key_env;
  if (cmd->count("--temperature")) p.temperature = f.temperature;
  if (cmd->count("--concurrency")) p.max_concurrency = f.concurrency;
  if (cmd->count("--timeout-ms")) p.timeout = std::chrono::milliseconds(f.timeout_ms);
  if (cmd->count("--max-retries")) p.max_retries = f.max_retries;
  if (cmd->count("--backoff-ms")) p.retry_backoff = std::chrono::milliseconds(f.backoff_ms);
  if (cmd->count("--cache-dir")) p.cache_dir = f.cache_dir;
  else if (global.cache_dir) p.cache_dir = *global.cache_dir;
  else if (cfg.cache_dir) p.cache_dir = *cfg.cache_dir;
  p.validate();
  return p;
}

void ensure_parent_dir(const std::filesystem::path& file) {
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
}

std::vector<std::string> read_id_pool(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw lk::data_error("cannot open pool file " + path.string());
  std::vector<std::string> ids;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) ids.push_back(line);
  }
  return ids;
}

void emit(const GlobalOptions& global, const json& machine, const std::string& human) {
  if (global.json_output) std::cout << machine.dump(2) << '\n';
  else std::cout << human;
}

// --------------------------------------------------------------------------
// validate
// --------------------------------------------------------------------------

struct ValidateOptions {
  std::string file;
  std::string schema;
  bool strict = false;
  std::string models_path;
};

int cmd_validate(const ValidateOptions& opt, const GlobalOptions& global) {
  std::vector<lk::ModelRef> manifest;
  const std::vector<lk::ModelRef>* manifest_ptr = nullptr;
  if (!opt.models_path.empty()) {
    manifest = lk::load_model_manifest(opt.models_path);
    manifest_ptr = &manifest;
  }
  lk::ValidationReport rep = lk::validate_dataset(
      opt.file, lk::dataset_schema_from_string(opt.schema), opt.strict, manifest_ptr);

  json violations = json::array();
  for (const lk::Violation& v : rep.violations)
    violations.push_back(json{{"line", v.line}, {"message", v.message}});
  json machine{{"file", opt.file},
               {"schema", opt.schema},
               {"records", rep.records},
               {"violations", violations}};

  std::ostringstream human;
  human << opt.file << ": " << rep.records << " record(s), " << rep.violations.size()
        << " violation(s)\n";
  for (const lk::Violation& v : rep.violations) {
    human << "  ";
    if (v.line > 0) human << "line " << v.line << ": ";
    human << v.message << '\n';
  }
  emit(global, machine, human.str());
  return rep.ok() ? 0 : 2;
}

// --------------------------------------------------------------------------
// judge
// --------------------------------------------------------------------------

struct JudgeOptions {
  std::string questions;
  std::vector<std::string> responses;
  ProviderFlags provider;
  bool swap = true;
  bool allow_partial = false;
  std::string judge_id;
  std::string tie_label;
  bool graded_labels = false;
  std::string out = "judgments.jsonl";
};

int cmd_judge(const JudgeOptions& opt, const CLI::App* cmd, const lk::RunConfig& cfg,
              const GlobalOptions& global) {
  auto provider = resolve_provider(opt.provider, cfg, global, cmd);
  auto questions = lk::read_jsonl<lk::PromptItem>(opt.questions);
  auto responses_a = lk::read_jsonl<lk::ResponseRecord>(opt.responses.at(0));
  auto responses_b = lk::read_jsonl<lk::ResponseRecord>(opt.responses.at(1));

  lk::orchestrator::RunOptions run;
  run.swap = cmd->count("--no-swap") ? false : (cmd->count("--swap") ? true : cfg.swap);
  run.allow_partial = opt.allow_partial;
  run.judge_id = opt.judge_id;
  run.labels = lk::prompts::verdict_labels(
      opt.tie_label.empty() ? std::nullopt : std::optional<std::string>(opt.tie_label),
      opt.graded_labels);

  ensure_parent_dir(opt.out);
  auto registry = lk::prompts::Registry::load_default();
  auto stats = lk::orchestrator::run_benchmark_judgments(questions, responses_a, responses_b,
                                                         provider, run, opt.out, registry);
  json machine{{"questions", stats.questions},
               {"records", stats.records},
               {"invalid", stats.invalid},
               {"out", opt.out}};
  std::ostringstream human;
  human << "judged " << stats.questions << " question(s): " << stats.records << " record(s), "
        << stats.invalid << " invalid -> " << opt.out << '\n';
  emit(global, machine, human.str());
  return 0;
}

// --------------------------------------------------------------------------
// pls
// --------------------------------------------------------------------------

struct PlsOptions {
  std::vector<std::string> judgment_files;
  std::vector<std::string> pair;
  std::vector<std::string> judges;
  std::string out = "pls_report.json";
  int resamples = 1000;
  bool no_ci = false;
  double level = 0.95;
  bool exclude_ties = false;
};

int cmd_pls(const PlsOptions& opt, const lk::RunConfig& cfg, const GlobalOptions& global) {
  std::vector<lk::JudgmentRecord> judgments;
  for (const std::string& file : opt.judgment_files) {
    auto part = lk::read_jsonl<lk::JudgmentRecord>(file);
    judgments.insert(judgments.end(), part.begin(), part.end());
  }
  lk::metrics::PairSpec pair{{opt.pair.at(0), opt.pair.at(1)},
                             {opt.judges.at(0), opt.judges.at(1)}};
  const auto policy = opt.exclude_ties ? lk::metrics::tie_policy::exclude
                                       : cfg.tie;

  lk::PLSResult result = lk::metrics::compute_pls_for_pair(judgments, pair, policy);
  if (!opt.no_ci) {
    const uint64_t seed = static_cast<uint64_t>(global.seed.value_or(cfg.seed));
    result.ci95 =
        lk::metrics::bootstrap_ci(judgments, pair, opt.resamples, seed, opt.level, policy);
  }

  ensure_parent_dir(opt.out);
  json report = lk::metrics::pls_report_json(result, policy);
  lk::write_json_file(opt.out, report);

  std::ostringstream human;
  human << "PLS(" << pair.students.first << ", " << pair.students.second << ") = "
        << lk::report::format_percent(result.pls) << " (" << result.pls << ")\n"
        << "  WR(i,i)=" << result.wr_ii.win_rate << " WR(i,j)=" << result.wr_ij.win_rate
        << " WR(j,j)=" << result.wr_jj.win_rate << " WR(j,i)=" << result.wr_ji.win_rate << '\n';
  if (result.ci95)
    human << "  ci" << static_cast<int>(opt.level * 100) << ": [" << result.ci95->first << ", "
          << result.ci95->second << "]\n";
  human << "  n_questions=" << result.n_questions << " tie_policy="
        << lk::metrics::to_string(policy) << "\n  wrote " << opt.out << '\n';
  emit(global, report, human.str());
  return 0;
}

// --------------------------------------------------------------------------
// recognize
// --------------------------------------------------------------------------

struct RecognizeOptions {
  std::string mode = "pointwise";
  std::string questions;
  std::string related;
  std::string unrelated;
  ProviderFlags provider;
  std::string out = "recognition.jsonl";
  std::string score_file;
};

int cmd_recognize(const RecognizeOptions& opt, const CLI::App* cmd, const lk::RunConfig& cfg,
                  const GlobalOptions& global) {
  std::vector<lk::analyses::RecognitionRecord> records;
  if (!opt.score_file.empty()) {
    records = lk::read_jsonl<lk::analyses::RecognitionRecord>(opt.score_file);
  } else {
    const auto mode = lk::analyses::recognition_mode_from_string(opt.mode);
    auto provider = resolve_provider(opt.provider, cfg, global, cmd);
    auto questions = lk::read_jsonl<lk::PromptItem>(opt.questions);
    auto related = lk::read_jsonl<lk::ResponseRecord>(opt.related);
    auto unrelated = lk::read_jsonl<lk::ResponseRecord>(opt.unrelated);
    const uint64_t seed = static_cast<uint64_t>(global.seed.value_or(cfg.seed));

    auto items = mode == lk::analyses::recognition_mode::pointwise
                     ? lk::analyses::build_pointwise_items(questions, related, unrelated, seed)
                     : lk::analyses::build_pairwise_items(questions, related, unrelated, seed);
    auto registry = lk::prompts::Registry::load_default();
    records = lk::analyses::run_recognition_probe(provider, mode, items, registry);
    ensure_parent_dir(opt.out);
    lk::write_jsonl(opt.out, records);
  }

  auto score = lk::analyses::score_recognition(records);
  json machine = lk::analyses::recognition_score_json(score);
  if (opt.score_file.empty()) machine["out"] = opt.out;

  std::ostringstream human;
  human << "recognition accuracy: " << lk::report::format_percent(score.accuracy) << " ("
        << score.correct << "/" << score.valid << " valid), invalid " << score.invalid
        << ", chance baseline " << lk::report::format_percent(score.chance_baseline) << '\n';
  emit(global, machine, human.str());
  return 0;
}

// --------------------------------------------------------------------------
// categorize
// --------------------------------------------------------------------------

struct CategorizeOptions {
  std::string scheme = "question_type";
  std::string questions;
  std::string judgments;
  ProviderFlags provider;
  std::string out = "assignments.jsonl";
  // per-category PLS mode
  std::string assignments;
  std::string pls_judgments;
  std::vector<std::string> pair;
  std::vector<std::string> judges;
  int min_n = 20;
  bool exclude_ties = false;
  std::string pls_out = "category_pls_report.json";
};

int cmd_categorize(const CategorizeOptions& opt, const CLI::App* cmd, const lk::RunConfig& cfg,
                   const GlobalOptions& global) {
  const auto scheme = lk::analyses::category_scheme_from_string(opt.scheme);

  if (!opt.assignments.empty()) {
    // Scoring mode: per-category PLS from existing assignments.
    auto assignments = lk::read_jsonl<lk::analyses::CategoryAssignment>(opt.assignments);
    auto judgments = lk::read_jsonl<lk::JudgmentRecord>(opt.pls_judgments);
    lk::metrics::PairSpec pair{{opt.pair.at(0), opt.pair.at(1)},
                               {opt.judges.at(0), opt.judges.at(1)}};
    const auto policy =
        opt.exclude_ties ? lk::metrics::tie_policy::exclude : cfg.tie;
    auto per_label =
        lk::analyses::per_category_pls(judgments, assignments, pair, opt.min_n, policy);
    json report = lk::analyses::category_pls_report_json(per_label, scheme, opt.min_n, policy);
    ensure_parent_dir(opt.pls_out);
    lk::write_json_file(opt.pls_out, report);

    std::ostringstream human;
    for (const auto& [label, entry] : per_label) {
      human << "  " << label << ": ";
      if (entry.sufficient)
        human << lk::report::format_percent(entry.result->pls) << " (n=" << entry.n_questions
              << ")\n";
      else
        human << "insufficient data (n=" << entry.n_questions << " < " << opt.min_n << ")\n";
    }
    human << "wrote " << opt.pls_out << '\n';
    emit(global, report, human.str());
    return 0;
  }

  // Assignment mode: run the categorization prompt over the subjects.
  std::vector<lk::analyses::Subject> subjects;
  if (scheme == lk::analyses::category_scheme::question_type) {
    for (const auto& q : lk::read_jsonl<lk::PromptItem>(opt.questions))
      subjects.push_back({q.id, q.text});
  } else {
    for (const auto& rec : lk::read_jsonl<lk::JudgmentRecord>(opt.judgments))
      subjects.push_back({lk::judgment_key(rec), rec.rationale.empty() ? rec.raw : rec.rationale});
  }
  auto provider = resolve_provider(opt.provider, cfg, global, cmd);
  auto registry = lk::prompts::Registry::load_default();
  auto outcome = lk::analyses::categorize(provider, scheme, subjects, registry);
  ensure_parent_dir(opt.out);
  lk::write_jsonl(opt.out, outcome.assignments);

  json machine{{"subjects", subjects.size()},
               {"warnings", outcome.warnings},
               {"out", opt.out}};
  std::ostringstream human;
  human << "categorized " << subjects.size() << " subject(s) (" << outcome.warnings.size()
        << " warning(s)) -> " << opt.out << '\n';
  emit(global, machine, human.str());
  return 0;
}

// --------------------------------------------------------------------------
// plan-mix
// --------------------------------------------------------------------------

struct PlanMixOptions {
  double fraction = 0.0;
  long long total = 0;
  std::string filler = "manual";
  std::string synthetic_pool;
  std::string filler_pool;
  std::string synthetic_source = "generator";
  std::string out = "mix_manifest.json";
  // optional experiment plan wrapper
  std::string plan_out;
  std::string name = "experiment";
  std::string relatedness;
  std::string direction;
  std::string instructions;
  std::string series;
  std::string generator;
  std::vector<std::string> judges;
  std::string method = "sft";
};

int cmd_plan_mix(const PlanMixOptions& opt, const CLI::App* cmd, const lk::RunConfig& cfg,
                 const GlobalOptions& global) {
  const int64_t seed = global.seed.value_or(cfg.seed);
  std::optional<lk::MixManifest> manifest;

  if (!opt.synthetic_pool.empty() || !opt.filler_pool.empty()) {
    auto synth = read_id_pool(opt.synthetic_pool);
    auto fill = read_id_pool(opt.filler_pool);
    manifest = lk::planner::plan_mixture(synth, fill, opt.fraction, opt.total,
                                         lk::filler_kind_from_string(opt.filler),
                                         opt.synthetic_source, seed);
    ensure_parent_dir(opt.out);
    lk::write_json_file(opt.out, json(*manifest));
  }

  json machine = json::object();
  std::ostringstream human;
  if (manifest) {
    long long n_synth = 0;
    for (const auto& item : manifest->items)
      if (item.origin == lk::item_origin::synthetic) ++n_synth;
    machine["mixture"] = {{"total", manifest->total},
                          {"synthetic", n_synth},
                          {"filler", manifest->total - n_synth},
                          {"out", opt.out}};
    human << "mixture: " << n_synth << " synthetic + " << manifest->total - n_synth
          << " filler = " << manifest->total << " -> " << opt.out << '\n';
  }

  if (!opt.plan_out.empty()) {
    if (opt.relatedness.empty() || opt.generator.empty())
      throw lk::usage_error("--plan requires --relatedness and --generator");
    lk::RelatednessSpec spec;
    spec.kind = lk::relatedness_kind_from_string(opt.relatedness);
    if (cmd->count("--direction"))
      spec.direction = opt.direction == "generator_from_judge"
                           ? lk::inheritance_direction::generator_from_judge
                           : lk::inheritance_direction::judge_from_generator;
    if (cmd->count("--instructions"))
      spec.instructions = opt.instructions == "same_instructions"
                              ? lk::instruction_reuse::same_instructions
                              : lk::instruction_reuse::different_instructions;
    if (cmd->count("--series"))
      spec.series = opt.series == "same_series" ? lk::series_match::same_series
                                                : lk::series_match::different_series;

    lk::ModelRef generator{opt.generator, lk::model_role::generator, std::nullopt, std::nullopt};
    std::vector<lk::ModelRef> judges;
    for (const std::string& id : opt.judges)
      judges.push_back({id, lk::model_role::judge, std::nullopt, std::nullopt});

    auto plan = lk::planner::plan_relatedness(
        spec, generator, std::move(judges),
        lk::planner::learning_method_from_string(opt.method), seed, opt.name);
    plan.mixture = manifest;
    ensure_parent_dir(opt.plan_out);
    lk::write_json_file(opt.plan_out, json(plan));
    machine["plan"] = {{"name", opt.name}, {"out", opt.plan_out}};
    human << "plan \"" << opt.name << "\" -> " << opt.plan_out << '\n';
  }

  if (machine.empty())
    throw lk::usage_error("plan-mix: give pool files for a mixture, --plan for a plan, or both");
  emit(global, machine, human.str());
  return 0;
}

// --------------------------------------------------------------------------
// simulate
// --------------------------------------------------------------------------

struct SimulateOptions {
  double bias = 0.0;
  double tau = 1.0;
  double mix = 1.0;
  long long n = 1000;
  std::string out_dir = ".";
  bool unrelated = false;
  std::string category_bias;
  int resamples = 0;
  bool emit_io = false;
};

std::map<std::string, double> parse_category_bias(const std::string& text) {
  std::map<std::string, double> out;
  std::istringstream in(text);
  std::string part;
  while (std::getline(in, part, ',')) {
    size_t eq = part.find('=');
    if (eq == std::string::npos)
      throw lk::usage_error("--category-bias expects name=multiplier[,name=multiplier...]");
    out[part.substr(0, eq)] = std::stod(part.substr(eq + 1));
  }
  return out;
}

int cmd_simulate(const SimulateOptions& opt, const lk::RunConfig& cfg,
                 const GlobalOptions& global) {
  lk::sim::SimConfig config;
  config.bias = opt.bias;
  config.tau = opt.tau;
  config.mix_fraction = opt.mix;
  config.n_questions = opt.n;
  config.seed = static_cast<uint64_t>(global.seed.value_or(cfg.seed));
  config.unrelated_judges = opt.unrelated;
  if (!opt.category_bias.empty()) config.category_bias = parse_category_bias(opt.category_bias);
  config.validate();

  auto outcome = lk::sim::run_leakage_experiment(config, opt.resamples);

  std::filesystem::path dir(opt.out_dir);
  std::filesystem::create_directories(dir);
  lk::write_jsonl(dir / "judgments.jsonl", outcome.judgments);
  json report = lk::sim::sim_report_json(config, outcome);
  lk::write_json_file(dir / "sim_report.json", report);

  if (opt.emit_io) {
    lk::write_jsonl(dir / "prompts.jsonl", outcome.questions);
    lk::write_jsonl(dir / "responses_a.jsonl", lk::sim::make_responses(config, lk::sim::kStudentA));
    lk::write_jsonl(dir / "responses_b.jsonl", lk::sim::make_responses(config, lk::sim::kStudentB));
  }
  if (!config.category_bias.empty()) {
    std::vector<lk::analyses::CategoryAssignment> assignments;
    for (const auto& q : outcome.questions) {
      lk::analyses::CategoryAssignment a;
      a.subject_id = q.id;
      a.scheme = lk::analyses::category_scheme::question_type;
      a.labels = {*q.question_type};
      assignments.push_back(std::move(a));
    }
    lk::write_jsonl(dir / "assignments.jsonl", assignments);
  }

  std::ostringstream human;
  human << "simulated " << config.n_questions << " question(s), seed " << config.seed << '\n'
        << "  empirical PLS " << outcome.pls.pls << " vs oracle " << outcome.oracle << " (|diff| "
        << std::abs(outcome.pls.pls - outcome.oracle) << ")\n";
  if (outcome.pls.ci95)
    human << "  ci95: [" << outcome.pls.ci95->first << ", " << outcome.pls.ci95->second << "]\n";
  human << "  wrote " << (dir / "judgments.jsonl").string() << ", "
        << (dir / "sim_report.json").string() << '\n';
  emit(global, report, human.str());
  return 0;
}

// --------------------------------------------------------------------------
// report
// --------------------------------------------------------------------------

struct ReportOptions {
  std::vector<std::string> pls_inputs;      // name=path
  std::vector<std::string> repeat_inputs;   // label=path1,path2,...
  std::string out_md;
  std::string out_json;
  bool sample_variance = false;
};

int cmd_report(const ReportOptions& opt, const GlobalOptions& global) {
  std::vector<lk::report::BenchmarkEntry> entries;
  for (const std::string& input : opt.pls_inputs) {
    size_t eq = input.find('=');
    if (eq == std::string::npos)
      throw lk::usage_error("--pls expects name=path, got \"" + input + "\"");
    lk::report::BenchmarkEntry entry;
    entry.benchmark = input.substr(0, eq);
    entry.result = lk::metrics::pls_result_from_report(
        lk::read_json_file(input.substr(eq + 1)), &entry.policy);
    entries.push_back(std::move(entry));
  }

  std::vector<std::pair<std::string, double>> runs;
  for (const std::string& input : opt.repeat_inputs) {
    size_t eq = input.find('=');
    if (eq == std::string::npos)
      throw lk::usage_error("--repeats expects label=path1,path2,..., got \"" + input + "\"");
    const std::string label = input.substr(0, eq);
    std::istringstream in(input.substr(eq + 1));
    std::string path;
    while (std::getline(in, path, ','))
      runs.emplace_back(label,
                        lk::metrics::pls_result_from_report(lk::read_json_file(path)).pls);
  }
  std::vector<lk::metrics::StabilityStats> stability;
  if (!runs.empty()) stability = lk::metrics::aggregate_repeats(runs, opt.sample_variance);

  auto tables = lk::report::build_report(entries, stability);
  if (!opt.out_md.empty()) {
    ensure_parent_dir(opt.out_md);
    std::ofstream out(opt.out_md, std::ios::binary | std::ios::trunc);
    out << tables.markdown;
  }
  if (!opt.out_json.empty()) {
    ensure_parent_dir(opt.out_json);
    lk::write_json_file(opt.out_json, tables.summary);
  }
  emit(global, tables.summary, tables.markdown);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  auto logger = spdlog::stderr_color_mt("leakscope");  // logs must not touch stdout
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%Y-%m-%d %H:%M:%S] [%l] %v");

  CLI::App app{"leakscope: preference-leakage audit toolkit for LLM-as-a-judge pipelines"};
  app.require_subcommand(1);

  GlobalOptions global;
  app.add_option("--config", global.config_path, "key = value config file");
  app.add_flag("--json", global.json_output, "machine-readable stdout");
  int64_t seed_value = 0;
  auto* seed_opt = app.add_option("--seed", seed_value, "seed for all seeded operations");
  std::string cache_dir_value;
  auto* cache_opt = app.add_option("--cache-dir", cache_dir_value, "response cache directory");
  app.add_option("--log-level", global.log_level,
                 "trace|debug|info|warn|error|critical|off");

  ValidateOptions vopt;
  auto* validate = app.add_subcommand("validate", "check a line-delimited dataset");
  validate->add_option("file", vopt.file, "dataset file")->required();
  validate->add_option("--schema", vopt.schema, "prompts|responses|judgments")->required();
  validate->add_flag("--strict", vopt.strict, "fail on the first malformed line");
  validate->add_option("--models", vopt.models_path, "model manifest for id resolution");

  JudgeOptions jopt;
  auto* judge = app.add_subcommand("judge", "pairwise judging over a question set");
  judge->add_option("--questions", jopt.questions, "prompts.jsonl")->required();
  judge->add_option("--responses", jopt.responses, "two responses.jsonl files")
      ->expected(2)
      ->required();
  add_provider_flags(judge, jopt.provider);
  judge->add_flag("--swap", "judge both presentation orders (default)");
  judge->add_flag("--no-swap", "single-order judging");
  judge->add_flag("--allow-partial", jopt.allow_partial, "skip questions without responses");
  judge->add_option("--judge-id", jopt.judge_id, "judge id recorded in judgments");
  judge->add_option("--tie-label", jopt.tie_label, "accept this label as a tie verdict");
  judge->add_flag("--graded-labels", jopt.graded_labels,
                  "also accept [[A>>B]]-style graded verdicts");
  judge->add_option("--out", jopt.out, "output judgments.jsonl");

  PlsOptions popt;
  auto* pls = app.add_subcommand("pls", "compute the Preference Leakage Score");
  pls->add_option("--judgments", popt.judgment_files, "judgment files (merged)")
      ->required()
      ->expected(-1);
  pls->add_option("--pair", popt.pair, "two student ids")->expected(2)->required();
  pls->add_option("--judges", popt.judges, "two judge ids (first relates to first student)")
      ->expected(2)
      ->required();
  pls->add_option("--out", popt.out, "output report path");
  pls->add_option("--resamples", popt.resamples, "bootstrap resamples");
  pls->add_flag("--no-ci", popt.no_ci, "skip the bootstrap interval");
  pls->add_option("--level", popt.level, "confidence level");
  pls->add_flag("--exclude-ties", popt.exclude_ties, "drop ties instead of half credit");

  RecognizeOptions ropt;
  auto* recognize = app.add_subcommand("recognize", "student recognition probe / scoring");
  recognize->add_option("--mode", ropt.mode, "pointwise|pairwise");
  recognize->add_option("--questions", ropt.questions, "prompts.jsonl");
  recognize->add_option("--related", ropt.related, "related student responses.jsonl");
  recognize->add_option("--unrelated", ropt.unrelated, "unrelated student responses.jsonl");
  add_provider_flags(recognize, ropt.provider);
  recognize->add_option("--out", ropt.out, "output recognition.jsonl");
  recognize->add_option("--score", ropt.score_file, "score an existing prediction file");

  CategorizeOptions copt;
  auto* categorize = app.add_subcommand("categorize", "category assignment / per-category PLS");
  categorize->add_option("--scheme", copt.scheme, "question_type|judgment_dimension");
  categorize->add_option("--questions", copt.questions, "prompts.jsonl (question_type)");
  categorize->add_option("--judgments", copt.judgments, "judgments.jsonl (judgment_dimension)");
  add_provider_flags(categorize, copt.provider);
  categorize->add_option("--out", copt.out, "output assignments.jsonl");
  categorize->add_option("--assignments", copt.assignments,
                         "existing assignments.jsonl (switches to PLS mode)");
  categorize->add_option("--pls-judgments", copt.pls_judgments, "judgments for per-category PLS");
  categorize->add_option("--pair", copt.pair, "two student ids")->expected(2);
  categorize->add_option("--judges", copt.judges, "two judge ids")->expected(2);
  categorize->add_option("--min-n", copt.min_n, "minimum questions per label");
  categorize->add_flag("--exclude-ties", copt.exclude_ties, "drop ties instead of half credit");
  categorize->add_option("--pls-out", copt.pls_out, "output category_pls_report.json");

  PlanMixOptions mopt;
  auto* plan_mix = app.add_subcommand("plan-mix", "deterministic mixture / experiment manifest");
  plan_mix->add_option("--fraction", mopt.fraction, "synthetic fraction in [0,1]");
  plan_mix->add_option("--total", mopt.total, "total training items");
  plan_mix->add_option("--filler", mopt.filler, "manual|multi_source_synthetic");
  plan_mix->add_option("--synthetic-pool", mopt.synthetic_pool, "file of prompt ids");
  plan_mix->add_option("--filler-pool", mopt.filler_pool, "file of prompt ids");
  plan_mix->add_option("--synthetic-source", mopt.synthetic_source, "generator model id");
  plan_mix->add_option("--out", mopt.out, "output mix_manifest.json");
  plan_mix->add_option("--plan", mopt.plan_out, "also write an experiment plan.json here");
  plan_mix->add_option("--name", mopt.name, "plan name");
  plan_mix->add_option("--relatedness", mopt.relatedness,
                       "same_model|inheritance|same_family|unrelated");
  plan_mix->add_option("--direction", mopt.direction,
                       "generator_from_judge|judge_from_generator");
  plan_mix->add_option("--instructions", mopt.instructions,
                       "same_instructions|different_instructions");
  plan_mix->add_option("--series", mopt.series, "same_series|different_series");
  plan_mix->add_option("--generator", mopt.generator, "generator model id");
  plan_mix->add_option("--judges", mopt.judges, "judge model ids")->expected(-1);
  plan_mix->add_option("--method", mopt.method, "sft|dpo|icl");

  SimulateOptions sopt;
  auto* simulate = app.add_subcommand("simulate", "synthetic ecosystem with known bias");
  simulate->add_option("--bias", sopt.bias, "injected style bias b");
  simulate->add_option("--tau", sopt.tau, "verdict noise temperature");
  simulate->add_option("--mix", sopt.mix, "fingerprint strength alpha in [0,1]");
  simulate->add_option("--n", sopt.n, "number of questions");
  simulate->add_option("--out", sopt.out_dir, "output directory");
  simulate->add_flag("--unrelated-judges", sopt.unrelated, "use the unrelated judge pair");
  simulate->add_option("--category-bias", sopt.category_bias,
                       "per-category multipliers, e.g. writing=1.0,math=0.0");
  simulate->add_option("--resamples", sopt.resamples, "bootstrap resamples (0 = none)");
  simulate->add_flag("--emit-io", sopt.emit_io,
                     "also write prompts/responses files for the orchestrator");

  ReportOptions repopt;
  auto* report = app.add_subcommand("report", "render Markdown + JSON summaries");
  report->add_option("--pls", repopt.pls_inputs, "name=pls_report.json (repeatable)")
      ->expected(-1);
  report->add_option("--repeats", repopt.repeat_inputs,
                     "label=report1.json,report2.json,... (repeatable)")
      ->expected(-1);
  report->add_option("--out-md", repopt.out_md, "write the Markdown report here");
  report->add_option("--out-json", repopt.out_json, "write the JSON summary here");
  report->add_flag("--sample-variance", repopt.sample_variance,
                   "divide by n-1 in stability variance");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << '\n' << app.get_name() << " --help shows usage\n";
    return 1;
  }

  auto level = spdlog::level::from_str(global.log_level);
  spdlog::set_level(level);
  if (seed_opt->count()) global.seed = seed_value;
  if (cache_opt->count()) global.cache_dir = cache_dir_value;

  try {
    lk::RunConfig cfg;
    if (!global.config_path.empty()) cfg = lk::load_run_config(global.config_path);

    if (app.got_subcommand(validate)) return cmd_validate(vopt, global);
    if (app.got_subcommand(judge)) return cmd_judge(jopt, judge, cfg, global);
    if (app.got_subcommand(pls)) return cmd_pls(popt, cfg, global);
    if (app.got_subcommand(recognize)) return cmd_recognize(ropt, recognize, cfg, global);
    if (app.got_subcommand(categorize)) return cmd_categorize(copt, categorize, cfg, global);
    if (app.got_subcommand(plan_mix)) return cmd_plan_mix(mopt, plan_mix, cfg, global);
    if (app.got_subcommand(simulate)) return cmd_simulate(sopt, cfg, global);
    if (app.got_subcommand(report)) return cmd_report(repopt, global);
    std::cerr << "no subcommand\n";
    return 1;
  } catch (const lk::error& e) {
    spdlog::error("{}", e.what());
    return static_cast<int>(e.kind());
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 2;
  }
}
