#pragma once

#include <atomic>
#include <cstddef>
#include <memory>
#include <string>

namespace longcode {

struct HttpRetryPolicy {
  int max_attempts = 4;
  int base_delay_ms = 500;
  int max_delay_ms = 8000;
};

/// JSON-over-HTTP POST with bounded in-flight requests and exponential
/// backoff on network errors, 408, 429 and 5xx.
class HttpTransport {
 public:
  HttpTransport(std::string url, HttpRetryPolicy policy, std::size_t max_in_flight,
                int timeout_s = 120);
  ~HttpTransport();
  HttpTransport(const HttpTransport&) = delete;
  HttpTransport& operator=(const HttpTransport&) = delete;

  /// Returns the body of a 2xx response; throws ServiceError otherwise.
  std::string post_json(const std::string& body, const std::string& bearer_token) const;

  /// Total attempts made, retries included.
  std::size_t attempts() const { return attempts_.load(); }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  mutable std::atomic<std::size_t> attempts_{0};
};

/// Value of an environment variable, or empty when unset.
std::string read_secret(const std::string& env_var);

}  // namespace longcode
