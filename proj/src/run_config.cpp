#include "leakscope/run_config.hpp"

#include <fstream>

namespace leakscope {

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string unquote(std::string v) {
  if (v.size() >= 2 && v.front() == '"' && v.back() == '"') return v.substr(1, v.size() - 2);
  return v;
}

bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw usage_error("config key " + key + " expects true or false, got \"" + v + "\"");
}

long long parse_int(const std::string& v, const std::string& key) {
  try {
    size_t pos = 0;
    long long n = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return n;
  } catch (const std::exception&) {
    throw usage_error("config key " + key + " expects an integer, got \"" + v + "\"");
  }
}

double parse_double(const std::string& v, const std::string& key) {
  try {
    size_t pos = 0;
    double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw usage_error("config key " + key + " expects a number, got \"" + v + "\"");
  }
}

void apply_provider_key(orchestrator::ProviderConfig& p, const std::string& field,
                        const std::string& value, const std::string& key) {
  if (field == "base_url") p.base_url = value;
  else if (field == "model") p.model = value;
  else if (field == "api_key_env") p.api_key_env = value;
  else if (field == "temperature") p.temperature = parse_double(value, key);
  else if (field == "max_concurrency") p.max_concurrency = static_cast<int>(parse_int(value, key));
  else if (field == "timeout_ms") p.timeout = std::chrono::milliseconds(parse_int(value, key));
  else if (field == "max_retries") p.max_retries = static_cast<int>(parse_int(value, key));
  else if (field == "backoff_ms") p.retry_backoff = std::chrono::milliseconds(parse_int(value, key));
  else throw usage_error("unknown provider field in config key \"" + key + "\"");
}

}  // namespace

const orchestrator::ProviderConfig& RunConfig::provider(const std::string& name) const {
  auto it = providers.find(name);
  if (it == providers.end())
    throw usage_error("provider \"" + name + "\" is not defined in the config");
  return it->second;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw usage_error("cannot open config file " + path.string());

  RunConfig cfg;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    size_t eq = stripped.find('=');
    if (eq == std::string::npos)
      throw usage_error(path.string() + ":" + std::to_string(lineno) +
                        ": expected key = value");
    std::string key = trim(stripped.substr(0, eq));
    std::string value = unquote(trim(stripped.substr(eq + 1)));

    if (key.rfind("provider.", 0) == 0) {
      std::string rest = key.substr(9);
      size_t dot = rest.find('.');
      if (dot == std::string::npos || dot == 0 || dot + 1 >= rest.size())
        throw usage_error(path.string() + ":" + std::to_string(lineno) +
                          ": provider keys look like provider.<name>.<field>");
      apply_provider_key(cfg.providers[rest.substr(0, dot)], rest.substr(dot + 1), value, key);
    } else if (key == "cache_dir") {
      cfg.cache_dir = value;
    } else if (key == "tie_policy") {
      cfg.tie = metrics::tie_policy_from_string(value);
    } else if (key == "swap") {
      cfg.swap = parse_bool(value, key);
    } else if (key == "output_dir") {
      cfg.output_dir = value;
    } else if (key == "seed") {
      cfg.seed = parse_int(value, key);
    } else {
      throw usage_error(path.string() + ":" + std::to_string(lineno) + ": unknown config key \"" +
                        key + "\"");
    }
  }
  return cfg;
}

}  // namespace leakscope
