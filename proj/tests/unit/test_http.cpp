#include <gtest/gtest.h>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <atomic>
#include <cstdlib>
#include <thread>

#include <nlohmann/json.hpp>

#include "longcode/chat.hpp"
#include "longcode/embedder.hpp"
#include "longcode/error.hpp"
#include "longcode/http.hpp"
#include "test_util.hpp"

using namespace longcode;
using nlohmann::json;

namespace {

// httplib server on an ephemeral localhost port, stopped on destruction.
class LocalServer {
 public:
  LocalServer() {
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~LocalServer() {
    server_.stop();
    thread_.join();
  }
  httplib::Server& server() { return server_; }
  std::string url(const std::string& path) const { return "http://127.0.0.1:" + std::to_string(port_) + path; }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

}  // namespace

TEST(HttpTransport, RetriesTransientFailures) {
  std::atomic<int> hits{0};
  std::string auth;
  httplib::Server* srv = nullptr;
  LocalServer local;
  srv = &local.server();
  srv->Post("/echo", [&](const httplib::Request& req, httplib::Response& res) {
    auth = req.get_header_value("Authorization");
    if (hits++ < 2) {
      res.status = 503;
      res.set_content("busy", "text/plain");
      return;
    }
    res.set_content(req.body, "application/json");
  });
  HttpTransport http(local.url("/echo"), {4, 1, 2}, 2, 5);
  EXPECT_EQ(http.post_json(R"({"a":1})", "tok"), R"({"a":1})");
  EXPECT_EQ(http.attempts(), 3u);
  EXPECT_EQ(auth, "Bearer tok");
}

TEST(HttpTransport, ClientErrorsAreNotRetried) {
  std::atomic<int> hits{0};
  LocalServer local;
  local.server().Post("/bad", [&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    res.status = 400;
    res.set_content("nope", "text/plain");
  });
  HttpTransport http(local.url("/bad"), {4, 1, 2}, 1, 5);
  try {
    http.post_json("{}", "");
    FAIL();
  } catch (const ServiceError& e) {
    EXPECT_NE(std::string(e.what()).find("HTTP 400"), std::string::npos);
  }
  EXPECT_EQ(hits.load(), 1);
}

TEST(HttpTransport, ExhaustedRetriesAndBadUrls) {
  LocalServer local;
  local.server().Post("/down", [](const httplib::Request&, httplib::Response& res) { res.status = 500; });
  HttpTransport http(local.url("/down"), {3, 1, 2}, 1, 5);
  EXPECT_THROW(http.post_json("{}", ""), ServiceError);
  EXPECT_EQ(http.attempts(), 3u);
  EXPECT_THROW(HttpTransport("localhost/x", {}, 1), UsageError);
}

TEST(RemoteProvider, PostsTextsAndImages) {
  LocalServer local;
  std::vector<json> bodies;
  std::mutex mu;
  local.server().Post("/embed", [&](const httplib::Request& req, httplib::Response& res) {
    const json body = json::parse(req.body);
    {
      std::lock_guard lock(mu);
      bodies.push_back(body);
    }
    const std::size_t n = body.contains("texts") ? body["texts"].size() : body["image_paths"].size();
    json vectors = json::array();
    for (std::size_t i = 0; i < n; ++i) vectors.push_back({3.0, 4.0 + static_cast<double>(i), 0.0});
    if (body.value("mode", "") == "video") vectors = json::array({{0.0, 0.0, 2.0}});
    res.set_content(json{{"vectors", vectors}}.dump(), "application/json");
  });
  RemoteEmbedderConfig cfg;
  cfg.endpoint = local.url("/embed");
  cfg.dim = 3;
  cfg.base_delay_ms = 1;
  RemoteProvider p(cfg);
  const auto e = p.embed_text("hello");
  EXPECT_NEAR(e.values()[0], 0.6, 1e-12);
  EXPECT_NEAR(e.values()[1], 0.8, 1e-12);
  EXPECT_EQ(bodies.back()["texts"], json::array({"hello"}));

  const auto m = testutil::make_manifest(2);
  const auto shot = p.embed_shot(m.shots[0]);
  EXPECT_EQ(bodies.back()["image_paths"], json(m.shots[0].keyframes));
  EXPECT_NEAR(std::hypot(shot.values()[0], shot.values()[1]), 1.0, 1e-12);
  EXPECT_EQ(p.embed_video(m).values()[2], 1.0);
  EXPECT_EQ(bodies.back()["image_paths"].size(), 4u);

  RemoteEmbedderConfig wrong = cfg;
  wrong.dim = 4;
  EXPECT_THROW(RemoteProvider(wrong).embed_text("x"), ServiceError);
  EXPECT_THROW(RemoteProvider(RemoteEmbedderConfig{}), UsageError);
}

TEST(HttpChatClient, SendsCanonicalBodyWithInlinedImages) {
  testutil::TempDir dir("chat");
  write_text_file(dir / "f.png", "abc");
  LocalServer local;
  json seen;
  local.server().Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    seen = json::parse(req.body);
    res.set_content(R"({"choices":[{"message":{"role":"assistant","content":"Score: 4"}}]})", "application/json");
  });
  HttpChatConfig cfg;
  cfg.endpoint = local.url("/v1/chat/completions");
  cfg.base_delay_ms = 1;
  HttpChatClient client(cfg);
  ChatRequest req{"judge", json::array({chat_message("user", json::array({text_part("rate"), image_part((dir / "f.png").string())}))}),
                  0.3, 9};
  EXPECT_EQ(client.complete(req), "Score: 4");
  EXPECT_EQ(seen["model"], "judge");
  EXPECT_EQ(seen["temperature"], 0.3);
  EXPECT_EQ(seen["seed"], 9);
  EXPECT_EQ(seen["messages"][0]["content"][1]["image_url"]["url"], "data:image/png;base64,YWJj");

  local.server().Post("/broken", [](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"choices":[]})", "application/json");
  });
  cfg.endpoint = local.url("/broken");
  EXPECT_THROW(HttpChatClient(cfg).complete(req), ServiceError);
  EXPECT_THROW(HttpChatClient(HttpChatConfig{}), UsageError);
}
