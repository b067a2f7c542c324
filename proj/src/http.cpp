#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "longcode/http.hpp"

#include <httplib.h>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <semaphore>
#include <thread>

#include "longcode/error.hpp"

namespace longcode {

struct HttpTransport::Impl {
  std::string origin;  // scheme://host[:port]
  std::string path;
  HttpRetryPolicy policy;
  int timeout_s;
  std::counting_semaphore<1024> in_flight;

  Impl(std::string url, HttpRetryPolicy p, std::size_t max_in_flight, int timeout)
      : policy(p), timeout_s(timeout),
        in_flight(static_cast<std::ptrdiff_t>(std::clamp<std::size_t>(max_in_flight, 1, 1024))) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw UsageError("endpoint '" + url + "' has no scheme");
    const auto path_start = url.find('/', scheme_end + 3);
    origin = url.substr(0, path_start);
    path = path_start == std::string::npos ? "/" : url.substr(path_start);
  }
};

HttpTransport::HttpTransport(std::string url, HttpRetryPolicy policy, std::size_t max_in_flight,
                             int timeout_s)
    : impl_(std::make_unique<Impl>(std::move(url), policy, max_in_flight, timeout_s)) {}

HttpTransport::~HttpTransport() = default;

namespace {

bool transient(int status) { return status == 408 || status == 429 || status >= 500; }

}  // namespace

std::string HttpTransport::post_json(const std::string& body, const std::string& bearer_token) const {
  struct Slot {
    std::counting_semaphore<1024>& sem;
    explicit Slot(std::counting_semaphore<1024>& s) : sem(s) { sem.acquire(); }
    ~Slot() { sem.release(); }
  } slot(impl_->in_flight);

  httplib::Headers headers;
  if (!bearer_token.empty()) headers.emplace("Authorization", "Bearer " + bearer_token);

  std::string last_error;
  int delay_ms = impl_->policy.base_delay_ms;
  for (int attempt = 1; attempt <= std::max(1, impl_->policy.max_attempts); ++attempt) {
    ++attempts_;
    httplib::Client client(impl_->origin);
    client.set_connection_timeout(impl_->timeout_s, 0);
    client.set_read_timeout(impl_->timeout_s, 0);
    client.set_write_timeout(impl_->timeout_s, 0);
    auto res = client.Post(impl_->path, headers, body, "application/json");
    if (res && res->status >= 200 && res->status < 300) return res->body;
    if (res) {
      last_error = "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 300);
      if (!transient(res->status)) break;
    } else {
      last_error = "network error: " + httplib::to_string(res.error());
    }
    if (attempt < impl_->policy.max_attempts && delay_ms > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms));
      delay_ms = std::min(delay_ms * 2, impl_->policy.max_delay_ms);
    }
  }
  throw ServiceError(impl_->origin + impl_->path + " failed: " + last_error);
}

std::string read_secret(const std::string& env_var) {
  if (env_var.empty()) return {};
  const char* v = std::getenv(env_var.c_str());
  return v ? std::string(v) : std::string();
}

}  // namespace longcode
