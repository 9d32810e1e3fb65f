#include "linked/llm/gateway.hpp"

#include <algorithm>

#include "linked/core/errors.hpp"
#include "linked/core/serialization.hpp"
#include "linked/core/stage_io.hpp"
#include "linked/util/hash.hpp"
#include "linked/util/parallel.hpp"

namespace linked::llm {
namespace {

class Permit {
 public:
  explicit Permit(std::counting_semaphore<4096>& sem) : sem_(sem) { sem_.acquire(); }
  ~Permit() { sem_.release(); }
  Permit(const Permit&) = delete;
  Permit& operator=(const Permit&) = delete;

 private:
  std::counting_semaphore<4096>& sem_;
};

}  // namespace

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
  if (!dir_.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw IoError("cannot create cache directory " + dir_.string() + ": " + ec.message());
  }
}

std::string ResponseCache::key_for(const std::string& model, const ChatRequest& req, int sample_index) {
  util::KeyBuilder key;
  key.add(std::string_view(model))
      .add(std::string_view(req.stage))
      .add(to_string(req.tag))
      .add(req.temperature)
      .add(req.max_tokens)
      .add(sample_index)
      .add(static_cast<std::int64_t>(req.messages.size()));
  for (const auto& m : req.messages) key.add(to_string(m.role)).add(std::string_view(m.content));
  return util::sha256_hex(key.str());
}

std::filesystem::path ResponseCache::path_for(const std::string& key) const {
  return dir_ / key.substr(0, 2) / (key + ".json");
}

std::optional<Completion> ResponseCache::get(const std::string& key) {
  {
    std::shared_lock lock(mu_);
    if (auto it = entries_.find(key); it != entries_.end()) return it->second;
  }
  if (dir_.empty()) return std::nullopt;
  const auto path = path_for(key);
  std::error_code ec;
  if (!std::filesystem::exists(path, ec)) return std::nullopt;
  Completion c;
  try {
    const Json j = Json::parse(read_file(path));
    c.text = j.at("text").get<std::string>();
    c.tokens_in = j.at("tokens_in").get<std::int64_t>();
    c.tokens_out = j.at("tokens_out").get<std::int64_t>();
  } catch (const std::exception&) {
    return std::nullopt;  // unreadable entry: treat as a miss and overwrite later
  }
  std::unique_lock lock(mu_);
  return entries_.try_emplace(key, c).first->second;
}

void ResponseCache::put(const std::string& key, const Completion& completion) {
  {
    std::unique_lock lock(mu_);
    if (!entries_.try_emplace(key, completion).second) return;
  }
  if (dir_.empty()) return;
  const auto path = path_for(key);
  std::error_code ec;
  std::filesystem::create_directories(path.parent_path(), ec);
  if (ec) throw IoError("cannot create cache shard " + path.parent_path().string());
  Json j = Json::object();
  j["text"] = completion.text;
  j["tokens_in"] = completion.tokens_in;
  j["tokens_out"] = completion.tokens_out;
  write_file_atomic(path, j.dump());
}

std::size_t ResponseCache::size() const {
  std::shared_lock lock(mu_);
  return entries_.size();
}

Gateway::Gateway(std::shared_ptr<ChatBackend> backend, GatewayOptions options)
    : backend_(std::move(backend)),
      options_(std::move(options)),
      cache_(options_.use_cache ? options_.cache_dir : std::filesystem::path{}),
      in_flight_(std::clamp(options_.concurrency_limit, 1, 4096)) {
  if (!backend_) throw ConfigError("gateway needs a backend");
  if (options_.concurrency_limit < 1) throw ConfigError("concurrency_limit must be >= 1");
}

std::vector<Completion> Gateway::call_backend(const ChatRequest& req, std::span<const int> indices) {
  if (indices.size() > 1 && backend_->multi_sample()) {
    try {
      Permit permit(in_flight_);
      auto out = backend_->generate(req, indices);
      if (out.size() != indices.size())
        throw MalformedResponseError("backend returned " + std::to_string(out.size()) +
                                     " completions for " + std::to_string(indices.size()) + " samples");
      return out;
    } catch (const MultiSampleRejected&) {
      // fall through to one request per sample
    }
  }
  std::vector<Completion> out(indices.size());
  util::parallel_for(indices.size(), static_cast<std::size_t>(options_.concurrency_limit),
                     [&](std::size_t i) {
                       Permit permit(in_flight_);
                       auto one = backend_->generate(req, indices.subspan(i, 1));
                       if (one.size() != 1) throw MalformedResponseError("backend returned no completion");
                       out[i] = std::move(one.front());
                     });
  return out;
}

ChatResponse Gateway::complete(const ChatRequest& req) {
  req.validate();
  const std::string model = backend_->model_id();
  const auto n = static_cast<std::size_t>(req.n_samples);

  std::vector<std::optional<Completion>> slots(n);
  std::vector<std::string> keys(n);
  std::vector<int> missing;
  std::vector<std::size_t> missing_slot;
  for (std::size_t i = 0; i < n; ++i) {
    const int index = req.first_sample + static_cast<int>(i);
    if (options_.use_cache) {
      keys[i] = ResponseCache::key_for(model, req, index);
      if (auto hit = cache_.get(keys[i])) {
        hit->cached = true;
        hit->tokens_in = 0;
        hit->tokens_out = 0;
        slots[i] = std::move(*hit);
        continue;
      }
    }
    missing.push_back(index);
    missing_slot.push_back(i);
  }

  if (!missing.empty()) {
    auto fresh = call_backend(req, missing);
    for (std::size_t m = 0; m < missing.size(); ++m) {
      fresh[m].cached = false;
      if (options_.use_cache) cache_.put(keys[missing_slot[m]], fresh[m]);
      slots[missing_slot[m]] = std::move(fresh[m]);
    }
  }

  ChatResponse resp;
  resp.cached = missing.empty();
  for (auto& slot : slots) {
    resp.tokens_in += slot->tokens_in;
    resp.tokens_out += slot->tokens_out;
    resp.completions.push_back(slot->text);
    resp.detail.push_back(std::move(*slot));
  }

  std::lock_guard lock(ledger_mu_);
  ledger_.requests += 1;
  ledger_.cache_hits += static_cast<std::int64_t>(n - missing.size());
  ledger_.tokens_in += resp.tokens_in;
  ledger_.tokens_out += resp.tokens_out;
  ledger_.generated[req.tag] += static_cast<std::int64_t>(missing.size());
  return resp;
}

TokenLedger Gateway::ledger() const {
  std::lock_guard lock(ledger_mu_);
  return ledger_;
}

}  // namespace linked::llm
