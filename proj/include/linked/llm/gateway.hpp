#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <shared_mutex>
#include <string>
#include <unordered_map>

#include "linked/llm/chat.hpp"

namespace linked::llm {

// Completion cache keyed by SHA-256 of (model, stage, tag, temperature,
// max_tokens, sample index, messages). Backed by memory and, when a
// directory is given, by one JSON file per entry.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir = {});

  static std::string key_for(const std::string& model, const ChatRequest& req, int sample_index);

  std::optional<Completion> get(const std::string& key);
  // First writer wins; later inserts for the same key are ignored.
  void put(const std::string& key, const Completion& completion);

  std::size_t size() const;

 private:
  std::filesystem::path path_for(const std::string& key) const;

  std::filesystem::path dir_;
  mutable std::shared_mutex mu_;
  std::unordered_map<std::string, Completion> entries_;
};

struct TokenLedger {
  std::int64_t requests = 0;
  std::int64_t cache_hits = 0;
  std::int64_t tokens_in = 0;   // non-cached usage only
  std::int64_t tokens_out = 0;  // non-cached usage only
  std::map<PromptTag, std::int64_t> generated;  // backend completions per prompt family

  std::int64_t total_tokens() const { return tokens_in + tokens_out; }
};

struct GatewayOptions {
  bool use_cache = true;
  std::filesystem::path cache_dir;  // empty: memory only
  int concurrency_limit = 4;
};

// Thread-safe front door to a chat backend: caching, bounded in-flight
// backend calls, n>1 fallback, and token accounting.
class Gateway {
 public:
  Gateway(std::shared_ptr<ChatBackend> backend, GatewayOptions options = {});

  ChatResponse complete(const ChatRequest& req);

  TokenLedger ledger() const;
  const ChatBackend& backend() const { return *backend_; }

 private:
  std::vector<Completion> call_backend(const ChatRequest& req, std::span<const int> indices);

  std::shared_ptr<ChatBackend> backend_;
  GatewayOptions options_;
  ResponseCache cache_;
  std::counting_semaphore<4096> in_flight_;
  mutable std::mutex ledger_mu_;
  TokenLedger ledger_;
};

}  // namespace linked::llm
