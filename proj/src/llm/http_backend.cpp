#include "linked/llm/http_backend.hpp"

#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "linked/core/errors.hpp"
#include "linked/util/log.hpp"

namespace linked::llm {

Endpoint Endpoint::parse(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("endpoint must include a scheme: " + url);
  const std::string scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") throw ConfigError("unsupported endpoint scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  Endpoint e;
  e.origin = url.substr(0, path_start);
  if (path_start != std::string::npos) e.prefix = url.substr(path_start);
  while (!e.prefix.empty() && e.prefix.back() == '/') e.prefix.pop_back();
  if (e.origin.size() <= scheme_end + 3) throw ConfigError("endpoint has no host: " + url);
  return e;
}

HttpBackend::HttpBackend(HttpBackendOptions options)
    : options_(std::move(options)), endpoint_(Endpoint::parse(options_.endpoint)) {}

Json HttpBackend::build_body(const ChatRequest& req, const std::string& model, int n) {
  Json body = Json::object();
  body["model"] = model;
  Json messages = Json::array();
  for (const auto& m : req.messages) {
    messages.push_back(Json{{"role", std::string(to_string(m.role))}, {"content", m.content}});
  }
  body["messages"] = std::move(messages);
  body["temperature"] = req.temperature;
  body["n"] = n;
  body["max_tokens"] = req.max_tokens;
  return body;
}

std::vector<Completion> HttpBackend::parse_body(const std::string& body) {
  Json j;
  try {
    j = Json::parse(body);
  } catch (const nlohmann::json::exception&) {
    throw MalformedResponseError("chat backend returned a non-JSON body");
  }
  try {
    const auto& choices = j.at("choices");
    if (!choices.is_array() || choices.empty())
      throw MalformedResponseError("chat backend returned no choices");
    std::vector<std::pair<std::int64_t, std::string>> indexed;
    std::int64_t position = 0;
    for (const auto& choice : choices) {
      const std::int64_t index = choice.value("index", position);
      const auto& content = choice.at("message").at("content");
      indexed.emplace_back(index, content.is_null() ? std::string() : content.get<std::string>());
      ++position;
    }
    std::stable_sort(indexed.begin(), indexed.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });

    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;
    if (auto usage = j.find("usage"); usage != j.end() && usage->is_object()) {
      prompt_tokens = usage->value("prompt_tokens", std::int64_t{0});
      completion_tokens = usage->value("completion_tokens", std::int64_t{0});
    }
    if (prompt_tokens < 0 || completion_tokens < 0)
      throw MalformedResponseError("chat backend reported negative token usage");

    std::vector<Completion> out(indexed.size());
    const auto n = static_cast<std::int64_t>(out.size());
    for (std::int64_t i = 0; i < n; ++i) {
      out[i].text = std::move(indexed[i].second);
      out[i].tokens_out = completion_tokens / n + (i < completion_tokens % n ? 1 : 0);
    }
    out.front().tokens_in = prompt_tokens;
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw MalformedResponseError(std::string("malformed chat response: ") + e.what());
  }
}

std::string HttpBackend::post(const std::string& body) {
  httplib::Client client(endpoint_.origin);
  client.set_connection_timeout(options_.timeout);
  client.set_read_timeout(options_.timeout);
  client.set_write_timeout(options_.timeout);
  httplib::Headers headers;
  if (!options_.api_key.empty()) headers.emplace("Authorization", "Bearer " + options_.api_key);
  const std::string path = endpoint_.prefix + "/chat/completions";

  std::string last_error;
  bool rate_limited = false;
  for (int attempt = 0; attempt <= options_.max_retries; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(options_.backoff * (1 << (attempt - 1)));
    auto res = client.Post(path, headers, body, "application/json");
    if (!res) {
      last_error = "request to " + endpoint_.origin + path + " failed: " + httplib::to_string(res.error());
      rate_limited = false;
    } else if (res->status == 429) {
      last_error = "rate limited (HTTP 429)";
      rate_limited = true;
    } else if (res->status >= 500) {
      last_error = "server error (HTTP " + std::to_string(res->status) + ")";
      rate_limited = false;
    } else if (res->status >= 400) {
      if (res->status == 400 && multi_sample_.load() && Json::parse(body, nullptr, false).value("n", 1) > 1) {
        multi_sample_ = false;
        throw MultiSampleRejected();
      }
      throw GatewayError("chat backend rejected request (HTTP " + std::to_string(res->status) +
                         "): " + res->body.substr(0, 200));
    } else {
      return res->body;
    }
    util::log_event("llm", "retry", Json{{"attempt", attempt + 1}, {"error", last_error}});
  }
  if (rate_limited) throw RateLimitError(last_error + " after " + std::to_string(options_.max_retries) + " retries");
  throw NetworkError(last_error + " after " + std::to_string(options_.max_retries) + " retries");
}

std::vector<Completion> HttpBackend::generate(const ChatRequest& req,
                                              std::span<const int> sample_indices) {
  std::vector<Completion> out;
  if (sample_indices.empty()) return out;
  if (sample_indices.size() > 1 && multi_sample_.load()) {
    const int n = static_cast<int>(sample_indices.size());
    out = parse_body(post(build_body(req, options_.model, n).dump()));
    if (out.size() > sample_indices.size()) out.resize(sample_indices.size());
  }
  // Single-sample mode, or the server truncated a multi-sample reply.
  while (out.size() < sample_indices.size()) {
    auto one = parse_body(post(build_body(req, options_.model, 1).dump()));
    out.push_back(std::move(one.front()));
  }
  return out;
}

std::string api_key_from_env() {
  if (const char* key = std::getenv("LINKED_LLM_API_KEY"); key && *key) return key;
  if (const char* key = std::getenv("OPENAI_API_KEY"); key && *key) return key;
  return {};
}

}  // namespace linked::llm
