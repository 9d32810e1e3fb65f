#pragma once

#include <atomic>
#include <chrono>
#include <string>

#include "linked/core/serialization.hpp"
#include "linked/llm/chat.hpp"

namespace linked::llm {

// Splits "http://host:port/prefix" into the part httplib connects to and the
// path prefix that precedes every route.
struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string prefix;  // "" or "/v1" etc., no trailing slash

  static Endpoint parse(const std::string& url);
};

struct HttpBackendOptions {
  std::string endpoint;
  std::string model;
  std::string api_key;
  int max_retries = 3;
  std::chrono::milliseconds backoff{500};
  std::chrono::seconds timeout{60};
};

// Chat-completions client: POST <endpoint>/chat/completions with
// {model, messages, temperature, n, max_tokens}. Network failures, 429 and
// 5xx are retried with exponential backoff.
class HttpBackend final : public ChatBackend {
 public:
  explicit HttpBackend(HttpBackendOptions options);

  std::string model_id() const override { return options_.model; }
  bool multi_sample() const override { return multi_sample_.load(); }
  std::vector<Completion> generate(const ChatRequest& req,
                                   std::span<const int> sample_indices) override;

  // Request body for `n` samples of `req`.
  static Json build_body(const ChatRequest& req, const std::string& model, int n);

  // Parses a response body into completions. Prompt tokens go to the first
  // completion; completion tokens are split evenly, remainder to the front.
  static std::vector<Completion> parse_body(const std::string& body);

 private:
  std::string post(const std::string& body);

  HttpBackendOptions options_;
  Endpoint endpoint_;
  std::atomic<bool> multi_sample_{true};
};

// Reads the API key from LINKED_LLM_API_KEY, falling back to OPENAI_API_KEY.
std::string api_key_from_env();

}  // namespace linked::llm
