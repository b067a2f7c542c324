#pragma once

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <functional>
#include <mutex>
#include <string>
#include <vector>

#include "longcode/chat.hpp"
#include "longcode/manifest.hpp"
#include "longcode/random.hpp"

namespace testutil {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("longcode-test-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Chat client answering from a callback; records every request.
class ScriptedChat : public longcode::ChatClient {
 public:
  using Reply = std::function<std::string(const longcode::ChatRequest&)>;
  explicit ScriptedChat(Reply reply) : reply_(std::move(reply)) {}

  std::string complete(const longcode::ChatRequest& request) override {
    {
      std::lock_guard lock(mu_);
      requests_.push_back(request);
    }
    return reply_(request);
  }

  std::size_t calls() const {
    std::lock_guard lock(mu_);
    return requests_.size();
  }
  std::vector<longcode::ChatRequest> requests() const {
    std::lock_guard lock(mu_);
    return requests_;
  }

 private:
  Reply reply_;
  mutable std::mutex mu_;
  std::vector<longcode::ChatRequest> requests_;
};

/// Concatenated text parts of the last message of a request.
inline std::string last_text(const longcode::ChatRequest& req) {
  std::string out;
  const auto& content = req.messages.back()["content"];
  if (content.is_string()) return content.get<std::string>();
  for (const auto& part : content) {
    if (part.value("type", "") == "text") out += part["text"].get<std::string>();
  }
  return out;
}

inline longcode::PromptSuite make_suite(std::size_t k, const std::string& id = "suite") {
  longcode::PromptSuite s;
  s.suite_id = id;
  s.storyline = "storyline of " + id;
  for (std::size_t i = 0; i < k; ++i) {
    s.shots.push_back({i, "description " + std::to_string(i) + " of " + id, 5.0, "cut"});
  }
  s.target_total_s = s.total_duration();
  return s;
}

inline longcode::ShotManifest make_manifest(std::size_t k, const std::string& id = "video", double duration = 5.0,
                                            const std::string& suite_id = "suite") {
  longcode::ShotManifest m;
  m.video_id = id;
  m.model_id = "model";
  m.suite_id = suite_id;
  for (std::size_t i = 0; i < k; ++i) {
    longcode::Shot s;
    s.index = i;
    s.duration_s = duration;
    s.embedding_ref = id + "/" + std::to_string(i);
    s.keyframes = {id + "/" + std::to_string(i) + "_0.png", id + "/" + std::to_string(i) + "_1.png"};
    m.shots.push_back(std::move(s));
  }
  return m;
}

inline std::vector<double> random_vector(longcode::Rng& rng, std::size_t n, bool ties) {
  std::vector<double> v(n);
  for (double& x : v) x = ties ? static_cast<double>(rng.below(5)) : rng.normal();
  return v;
}

}  // namespace testutil
