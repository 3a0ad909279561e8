#pragma once

#include <cctype>
#include <chrono>
#include <cstdlib>
#include <optional>
#include <string>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "abr/errors.hpp"

namespace abr {

class JudgeUnavailable : public Error {
 public:
  using Error::Error;
};

class JudgeUnparseable : public Error {
 public:
  using Error::Error;
};

struct JudgeConfig {
  std::string url;      // e.g. https://judge.internal:8443/v1 or http://127.0.0.1:9000
  std::string api_key;  // read from ABR_JUDGE_API_KEY
  std::string model = "gpt-judge";
  int max_retries = 3;  // beyond the initial attempt
  int initial_backoff_ms = 250;
  int timeout_sec = 30;

  static JudgeConfig from_env(std::string url) {
    JudgeConfig cfg;
    cfg.url = std::move(url);
    if (const char* key = std::getenv("ABR_JUDGE_API_KEY")) cfg.api_key = key;
    return cfg;
  }
};

// Last YES/NO token decides the verdict: whitespace-delimited words with
// leading/trailing punctuation stripped, case-insensitive.
inline std::optional<int> parse_judge_verdict(const std::string& content) {
  std::string token;
  std::optional<int> verdict;
  auto consider = [&]() {
    std::size_t begin = 0, end = token.size();
    while (begin < end && !std::isalnum(static_cast<unsigned char>(token[begin]))) ++begin;
    while (end > begin && !std::isalnum(static_cast<unsigned char>(token[end - 1]))) --end;
    std::string word;
    for (std::size_t i = begin; i < end; ++i) {
      word.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(token[i]))));
    }
    if (word == "YES") verdict = 1;
    if (word == "NO") verdict = 0;
    token.clear();
  };
  for (char c : content) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      consider();
    } else {
      token.push_back(c);
    }
  }
  consider();
  return verdict;
}

// Minimal client for an OpenAI-compatible chat-completions judge. Network
// failures retry with exponential backoff; a reply without a YES/NO verdict
// raises JudgeUnparseable so the caller can fall back to the rule-based
// scorer with a provenance tag.
class JudgeClient {
 public:
  explicit JudgeClient(JudgeConfig cfg) : cfg_(std::move(cfg)) {
    std::string rest = cfg_.url;
    std::size_t scheme = rest.find("://");
    std::size_t path_at = scheme == std::string::npos ? rest.find('/') : rest.find('/', scheme + 3);
    if (path_at != std::string::npos) {
      path_prefix_ = rest.substr(path_at);
      base_ = rest.substr(0, path_at);
    } else {
      base_ = rest;
    }
    while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
    // Accept a bare host, a .../v1 base, or the full completions path.
    if (path_prefix_.ends_with("/chat/completions")) {
      endpoint_ = path_prefix_;
    } else if (path_prefix_.ends_with("/v1")) {
      endpoint_ = path_prefix_ + "/chat/completions";
    } else {
      endpoint_ = path_prefix_ + "/v1/chat/completions";
    }
  }

  // 1 for a match, 0 otherwise.
  int judge(const std::string& question, const std::string& reference_answer, const std::string& model_answer) {
    nlohmann::json body{
        {"model", cfg_.model},
        {"temperature", 0},
        {"messages",
         {{{"role", "system"},
           {"content",
            "You grade answers. Given a question, the reference answer and a candidate answer, decide whether "
            "the candidate matches the reference. End your reply with YES or NO."}},
          {{"role", "user"},
           {"content", "Question:\n" + question + "\n\nReference answer:\n" + reference_answer +
                           "\n\nCandidate answer:\n" + model_answer +
                           "\n\nDoes the candidate match the reference? Reply YES or NO."}}}}};
    const std::string payload = body.dump();

    int backoff = cfg_.initial_backoff_ms;
    std::string last_error = "no attempt made";
    for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
      if (attempt > 0) {
        std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
        backoff *= 2;
      }
      httplib::Client client(base_);
      client.set_connection_timeout(cfg_.timeout_sec, 0);
      client.set_read_timeout(cfg_.timeout_sec, 0);
      httplib::Headers headers;
      if (!cfg_.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg_.api_key);
      auto res = client.Post(endpoint_, headers, payload, "application/json");
      if (!res) {
        last_error = "transport error: " + httplib::to_string(res.error());
        continue;
      }
      if (res->status != 200) {
        last_error = "http status " + std::to_string(res->status);
        continue;
      }
      nlohmann::json reply = nlohmann::json::parse(res->body, nullptr, false);
      if (reply.is_discarded()) throw JudgeUnparseable("judge reply is not JSON");
      std::string content;
      try {
        content = reply.at("choices").at(0).at("message").at("content").get<std::string>();
      } catch (const nlohmann::json::exception&) {
        throw JudgeUnparseable("judge reply misses choices[0].message.content");
      }
      auto verdict = parse_judge_verdict(content);
      if (!verdict) throw JudgeUnparseable("no YES/NO verdict in: " + content);
      return *verdict;
    }
    throw JudgeUnavailable("judge endpoint unreachable after " + std::to_string(cfg_.max_retries + 1) +
                           " attempts (" + last_error + ")");
  }

 private:
  JudgeConfig cfg_;
  std::string base_;
  std::string path_prefix_;
  std::string endpoint_;
};

}  // namespace abr
