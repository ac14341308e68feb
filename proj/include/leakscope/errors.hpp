#pragma once

#include <stdexcept>
#include <string>

namespace leakscope {

// Error taxonomy shared by the library and the CLI driver. The CLI maps
// kinds to exit codes: usage -> 1, data -> 2, provider -> 3.
enum class errc { usage = 1, data = 2, provider = 3 };

class error : public std::runtime_error {
 public:
  error(errc kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
  errc kind() const noexcept { return kind_; }

 private:
  errc kind_;
};

class usage_error : public error {
 public:
  explicit usage_error(const std::string& msg) : error(errc::usage, msg) {}
};

class data_error : public error {
 public:
  explicit data_error(const std::string& msg) : error(errc::data, msg) {}
};

enum class provider_errc {
  authentication,
  timeout,
  exhausted_retries,
  http,
  malformed_response,
};

class provider_error : public error {
 public:
  provider_error(provider_errc code, const std::string& msg)
      : error(errc::provider, msg), code_(code) {}
  provider_errc code() const noexcept { return code_; }

 private:
  provider_errc code_;
};

}  // namespace leakscope
