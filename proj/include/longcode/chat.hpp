#pragma once

// Chat-completions client surface: request canonicalization, the HTTP
// client, and the cassette layer that records and replays responses.

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace longcode {

class HttpTransport;

struct ChatRequest {
  std::string model;
  nlohmann::json messages = nlohmann::json::array();
  double temperature = 0.0;
  std::uint64_t seed = 0;

  /// Sorted-key JSON of every field that affects the response.
  nlohmann::json canonical() const;
  /// Hex SHA-256 of canonical().dump().
  std::string hash() const;
};

nlohmann::json text_part(std::string_view text);
/// Image reference; the HTTP layer inlines the file when it sends.
nlohmann::json image_part(const std::string& path);
nlohmann::json chat_message(std::string_view role, nlohmann::json content);

std::string sha256_hex(std::string_view data);

class ChatClient {
 public:
  virtual ~ChatClient() = default;
  /// Returns choices[0].message.content.
  virtual std::string complete(const ChatRequest& request) = 0;
};

struct HttpChatConfig {
  std::string endpoint;  // e.g. http://localhost:8000/v1/chat/completions
  std::string token_env = "LONGCODE_JUDGE_TOKEN";
  std::size_t max_in_flight = 4;
  int max_attempts = 4;
  int base_delay_ms = 500;
  int timeout_s = 300;
  bool inline_images = true;  // send keyframes as base64 data URLs
};

class HttpChatClient : public ChatClient {
 public:
  explicit HttpChatClient(HttpChatConfig cfg);
  ~HttpChatClient() override;

  std::string complete(const ChatRequest& request) override;

  /// Wire body for `request` (images inlined when configured).
  nlohmann::json wire_body(const ChatRequest& request) const;

 private:
  HttpChatConfig cfg_;
  std::unique_ptr<HttpTransport> http_;
};

enum class CassetteMode {
  replay,  // serve from disk only; a miss is a ServiceError
  record,  // serve from disk, forward misses upstream and persist them
};

struct Cassette {
  std::string request_hash;
  nlohmann::json canonical_request;
  std::string response_text;
};

class CassetteClient : public ChatClient {
 public:
  CassetteClient(std::filesystem::path dir, CassetteMode mode,
                 std::shared_ptr<ChatClient> upstream = nullptr);

  std::string complete(const ChatRequest& request) override;

  std::filesystem::path path_for(const std::string& request_hash) const;
  std::size_t upstream_calls() const { return upstream_calls_.load(); }
  std::size_t hits() const { return hits_.load(); }

 private:
  std::filesystem::path dir_;
  CassetteMode mode_;
  std::shared_ptr<ChatClient> upstream_;
  std::mutex write_mu_;
  std::atomic<std::size_t> upstream_calls_{0};
  std::atomic<std::size_t> hits_{0};
};

Cassette load_cassette(const std::filesystem::path& path);
void save_cassette(const Cassette& cassette, const std::filesystem::path& path);

}  // namespace longcode
