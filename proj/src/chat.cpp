#include "longcode/chat.hpp"

#include <openssl/evp.h>

#include <array>
#include <iomanip>
#include <sstream>

#include "longcode/error.hpp"
#include "longcode/http.hpp"
#include "longcode/manifest.hpp"

namespace longcode {

using nlohmann::json;

json ChatRequest::canonical() const {
  return {{"model", model}, {"messages", messages}, {"temperature", temperature}, {"seed", seed}};
}

std::string ChatRequest::hash() const { return sha256_hex(canonical().dump()); }

json text_part(std::string_view text) { return {{"type", "text"}, {"text", std::string(text)}}; }

json image_part(const std::string& path) {
  return {{"type", "image_url"}, {"image_url", {{"url", "file://" + path}}}};
}

json chat_message(std::string_view role, json content) {
  return {{"role", std::string(role)}, {"content", std::move(content)}};
}

std::string sha256_hex(std::string_view data) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorKind::io, "sha256 failed");
  }
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) {
    os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return os.str();
}

namespace {

std::string base64(std::string_view bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3) + 1, '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(bytes.data()),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::string mime_for(const std::string& path) {
  const auto dot = path.rfind('.');
  const std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
  if (ext == "jpg" || ext == "jpeg") return "image/jpeg";
  if (ext == "webp") return "image/webp";
  return "image/png";
}

}  // namespace

HttpChatClient::HttpChatClient(HttpChatConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.endpoint.empty()) throw UsageError("judge endpoint is not configured");
  http_ = std::make_unique<HttpTransport>(cfg_.endpoint,
                                          HttpRetryPolicy{cfg_.max_attempts, cfg_.base_delay_ms, 8000},
                                          cfg_.max_in_flight, cfg_.timeout_s);
}

HttpChatClient::~HttpChatClient() = default;

json HttpChatClient::wire_body(const ChatRequest& request) const {
  json body = request.canonical();
  if (!cfg_.inline_images) return body;
  for (auto& msg : body["messages"]) {
    if (!msg["content"].is_array()) continue;
    for (auto& part : msg["content"]) {
      if (part.value("type", "") != "image_url") continue;
      std::string url = part["image_url"]["url"].get<std::string>();
      if (url.rfind("file://", 0) != 0) continue;
      const std::string path = url.substr(7);
      part["image_url"]["url"] = "data:" + mime_for(path) + ";base64," + base64(read_text_file(path));
    }
  }
  return body;
}

std::string HttpChatClient::complete(const ChatRequest& request) {
  const std::string reply = http_->post_json(wire_body(request).dump(), read_secret(cfg_.token_env));
  try {
    const json j = json::parse(reply);
    const json& content = j.at("choices").at(0).at("message").at("content");
    if (content.is_string()) return content.get<std::string>();
    // Some servers return content parts.
    std::string text;
    for (const auto& part : content) text += part.value("text", "");
    return text;
  } catch (const json::exception& e) {
    throw ServiceError(std::string("malformed chat completion: ") + e.what());
  }
}

json to_json(const Cassette& c) {
  return {{"request_hash", c.request_hash},
          {"canonical_request", c.canonical_request},
          {"response_text", c.response_text}};
}

Cassette load_cassette(const std::filesystem::path& path) {
  const json j = read_json_file(path);
  try {
    return {j.at("request_hash").get<std::string>(), j.at("canonical_request"),
            j.at("response_text").get<std::string>()};
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void save_cassette(const Cassette& cassette, const std::filesystem::path& path) {
  write_text_file(path, to_json(cassette).dump(2) + "\n");
}

CassetteClient::CassetteClient(std::filesystem::path dir, CassetteMode mode,
                               std::shared_ptr<ChatClient> upstream)
    : dir_(std::move(dir)), mode_(mode), upstream_(std::move(upstream)) {
  if (mode_ == CassetteMode::record) {
    if (!upstream_) throw UsageError("record mode needs an upstream chat client");
    std::filesystem::create_directories(dir_);
  }
}

std::filesystem::path CassetteClient::path_for(const std::string& request_hash) const {
  return dir_ / (request_hash + ".json");
}

std::string CassetteClient::complete(const ChatRequest& request) {
  const std::string h = request.hash();
  const auto path = path_for(h);
  if (std::filesystem::exists(path)) {
    Cassette c = load_cassette(path);
    if (c.request_hash != h) throw ParseError(path.string() + ": request hash does not match file name");
    ++hits_;
    return c.response_text;
  }
  if (mode_ == CassetteMode::replay) {
    throw ServiceError("no cassette for request " + h + " in " + dir_.string());
  }
  ++upstream_calls_;
  std::string response = upstream_->complete(request);
  std::lock_guard lock(write_mu_);
  save_cassette({h, request.canonical(), response}, path);
  return response;
}

}  // namespace longcode
