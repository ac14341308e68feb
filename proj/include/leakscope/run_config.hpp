#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "leakscope/metrics.hpp"
#include "leakscope/orchestrator.hpp"

namespace leakscope {

// Shared driver configuration, loadable from a flat key = value text file
// (TOML-like, "#" comments). Flags override file values; secrets only ever
// arrive through the environment variable a provider names.
struct RunConfig {
  std::map<std::string, orchestrator::ProviderConfig> providers;
  std::optional<std::filesystem::path> cache_dir;
  metrics::tie_policy tie = metrics::tie_policy::half_credit;
  bool swap = true;
  std::filesystem::path output_dir = ".";
  int64_t seed = 0;

  const orchestrator::ProviderConfig& provider(const std::string& name) const;
};

// Accepted keys: cache_dir, tie_policy, swap, output_dir, seed, and
// provider.<name>.{base_url,model,api_key_env,temperature,max_concurrency,
// timeout_ms,max_retries,backoff_ms}.
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace leakscope
