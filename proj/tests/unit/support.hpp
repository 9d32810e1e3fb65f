#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <string>
#include <thread>
#include <unistd.h>
#include <vector>

#include <httplib.h>

#include "linked/core/types.hpp"
#include "linked/llm/chat.hpp"
#include "linked/llm/mock.hpp"

namespace testing {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("linked-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline linked::Question make_question(std::string id = "q1", int gold = 0, int n_options = 2) {
  linked::Question q;
  q.id = std::move(id);
  q.stem = "Which one fits?";
  for (int i = 0; i < n_options; ++i) q.options.push_back("option " + std::to_string(i + 1));
  q.gold = gold;
  return q;
}

// Wraps another backend and counts backend calls and samples per prompt tag.
class CountingBackend final : public linked::llm::ChatBackend {
 public:
  explicit CountingBackend(std::shared_ptr<linked::llm::ChatBackend> inner) : inner_(std::move(inner)) {}

  std::string model_id() const override { return inner_->model_id(); }
  bool multi_sample() const override { return inner_->multi_sample(); }
  std::vector<linked::llm::Completion> generate(const linked::llm::ChatRequest& req,
                                                std::span<const int> indices) override {
    {
      std::lock_guard lock(mu_);
      ++calls_[req.tag];
      samples_[req.tag] += static_cast<int>(indices.size());
      requests_.push_back(req);
    }
    return inner_->generate(req, indices);
  }

  int calls(linked::llm::PromptTag tag) const {
    std::lock_guard lock(mu_);
    auto it = calls_.find(tag);
    return it == calls_.end() ? 0 : it->second;
  }
  int samples(linked::llm::PromptTag tag) const {
    std::lock_guard lock(mu_);
    auto it = samples_.find(tag);
    return it == samples_.end() ? 0 : it->second;
  }
  std::vector<linked::llm::ChatRequest> requests() const {
    std::lock_guard lock(mu_);
    return requests_;
  }

 private:
  std::shared_ptr<linked::llm::ChatBackend> inner_;
  mutable std::mutex mu_;
  std::map<linked::llm::PromptTag, int> calls_;
  std::map<linked::llm::PromptTag, int> samples_;
  std::vector<linked::llm::ChatRequest> requests_;
};

// Answers every request through a callback: (request, sample index) -> text.
class ScriptedBackend final : public linked::llm::ChatBackend {
 public:
  using Fn = std::function<std::string(const linked::llm::ChatRequest&, int)>;
  explicit ScriptedBackend(Fn fn, std::string id = "scripted") : fn_(std::move(fn)), id_(std::move(id)) {}

  std::string model_id() const override { return id_; }
  std::vector<linked::llm::Completion> generate(const linked::llm::ChatRequest& req,
                                                std::span<const int> indices) override {
    std::vector<linked::llm::Completion> out;
    for (int i : indices) {
      linked::llm::Completion c;
      c.text = fn_(req, i);
      c.tokens_in = 10;
      c.tokens_out = linked::llm::count_words(c.text);
      out.push_back(std::move(c));
    }
    return out;
  }

 private:
  Fn fn_;
  std::string id_;
};

// httplib server on a free local port, served from a background thread.
class LocalServer {
 public:
  LocalServer() = default;
  LocalServer(const LocalServer&) = delete;
  LocalServer& operator=(const LocalServer&) = delete;
  ~LocalServer() { stop(); }

  httplib::Server& server() { return server_; }

  void start() {
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  void stop() {
    if (thread_.joinable()) {
      server_.stop();
      thread_.join();
    }
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
};

}  // namespace testing
