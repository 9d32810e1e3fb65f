#include "linked/util/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace linked::util {
namespace {

std::atomic<bool> g_enabled{true};
std::mutex g_mu;

}  // namespace

void set_logging(bool enabled) { g_enabled = enabled; }

bool logging_enabled() { return g_enabled; }

void log_event(std::string_view stage, std::string_view event, const Json& fields) {
  if (!g_enabled) return;
  Json line = Json::object();
  line["stage"] = stage;
  line["event"] = event;
  if (fields.is_object()) {
    for (auto it = fields.begin(); it != fields.end(); ++it) line[it.key()] = it.value();
  }
  const std::string text = line.dump();
  std::lock_guard lock(g_mu);
  std::cerr << text << '\n';
}

}  // namespace linked::util
