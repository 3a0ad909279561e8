#include <catch2/catch_amalgamated.hpp>

#include <atomic>
#include <thread>

#include <httplib.h>

#include "abr/judge_client.hpp"

using namespace abr;

TEST_CASE("verdict parsing takes the last YES/NO token") {
  CHECK(parse_judge_verdict("YES") == 1);
  CHECK(parse_judge_verdict("no") == 0);
  CHECK(parse_judge_verdict("The answer is correct. YES") == 1);
  CHECK(parse_judge_verdict("Yes, but strictly speaking... NO.") == 0);
  CHECK(parse_judge_verdict("the word yesterday contains yes-ish letters") == std::nullopt);
  CHECK(parse_judge_verdict("") == std::nullopt);
}

namespace {

struct MockJudge {
  httplib::Server server;
  int port = 0;
  std::thread thread;
  std::atomic<int> hits{0};

  explicit MockJudge(std::string content, int status = 200, bool raw_body = false) {
    server.Post("/v1/chat/completions", [this, content, status, raw_body](const httplib::Request&,
                                                                          httplib::Response& res) {
      ++hits;
      res.status = status;
      if (raw_body) {
        res.set_content(content, "application/json");
      } else {
        nlohmann::json reply{{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}}}}};
        res.set_content(reply.dump(), "application/json");
      }
    });
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this]() { server.listen_after_bind(); });
    server.wait_until_ready();
  }

  ~MockJudge() {
    server.stop();
    thread.join();
  }

  JudgeConfig config() const {
    JudgeConfig cfg;
    cfg.url = "http://127.0.0.1:" + std::to_string(port);
    cfg.api_key = "test-key";
    cfg.max_retries = 1;
    cfg.initial_backoff_ms = 1;
    cfg.timeout_sec = 5;
    return cfg;
  }
};

}  // namespace

TEST_CASE("a YES completion scores 1") {
  MockJudge mock("The candidate matches the reference. YES");
  JudgeClient client(mock.config());
  CHECK(client.judge("What is 2+2?", "4", "four, i.e. 4") == 1);
  CHECK(mock.hits == 1);
}

TEST_CASE("a NO completion scores 0") {
  MockJudge mock("NO");
  JudgeClient client(mock.config());
  CHECK(client.judge("q", "ref", "something else") == 0);
}

TEST_CASE("a reply without a verdict raises JudgeUnparseable") {
  MockJudge mock("I am not sure about this one.");
  JudgeClient client(mock.config());
  CHECK_THROWS_AS(client.judge("q", "ref", "ans"), JudgeUnparseable);
}

TEST_CASE("a malformed reply body raises JudgeUnparseable") {
  MockJudge mock("{\"unexpected\": true}", 200, /*raw_body=*/true);
  JudgeClient client(mock.config());
  CHECK_THROWS_AS(client.judge("q", "ref", "ans"), JudgeUnparseable);
}

TEST_CASE("server errors retry and then raise JudgeUnavailable") {
  MockJudge mock("oops", 503, /*raw_body=*/true);
  JudgeConfig cfg = mock.config();
  cfg.max_retries = 2;
  JudgeClient client(cfg);
  CHECK_THROWS_AS(client.judge("q", "ref", "ans"), JudgeUnavailable);
  CHECK(mock.hits == 3);  // initial attempt + two retries
}

TEST_CASE("an unreachable endpoint raises JudgeUnavailable after retries") {
  JudgeConfig cfg;
  cfg.url = "http://127.0.0.1:1";  // nothing listens there
  cfg.max_retries = 3;
  cfg.initial_backoff_ms = 1;
  cfg.timeout_sec = 1;
  JudgeClient client(cfg);
  CHECK_THROWS_AS(client.judge("q", "ref", "ans"), JudgeUnavailable);
}
