#include "linked/core/types.hpp"

#include "linked/core/errors.hpp"

namespace linked {

void RunConfig::validate() const {
  if (knowledge_samples < 1) throw ConfigError("knowledge_samples must be >= 1");
  if (answer_samples < 1) throw ConfigError("answer_samples must be >= 1");
  if (top_k < 1 || top_k > knowledge_samples)
    throw ConfigError("top_k must satisfy 1 <= top_k <= knowledge_samples (top_k=" +
                      std::to_string(top_k) + ", knowledge_samples=" +
                      std::to_string(knowledge_samples) + ")");
  if (!(knowledge_temperature >= 0.0)) throw ConfigError("knowledge_temperature must be >= 0");
  if (!(answer_temperature >= 0.0)) throw ConfigError("answer_temperature must be >= 0");
  if (concurrency_limit < 1) throw ConfigError("concurrency_limit must be >= 1");
  if (llm_endpoint.empty()) throw ConfigError("llm_endpoint must not be empty");
  if (max_retries < 0) throw ConfigError("max_retries must be >= 0");
  if (retry_backoff_ms < 0) throw ConfigError("retry_backoff_ms must be >= 0");
  if (request_timeout_s < 1) throw ConfigError("request_timeout_s must be >= 1");
}

std::string_view to_string(Level level) {
  switch (level) {
    case Level::useful: return "useful";
    case Level::harmless: return "harmless";
    case Level::useless: return "useless";
    case Level::harmful: return "harmful";
  }
  return "?";
}

std::string_view to_string(Label label) {
  return label == Label::positive ? "positive" : "negative";
}

std::string_view to_string(Condition condition) {
  return condition == Condition::direct ? "direct" : "with_knowledge";
}

Level level_from_int(int value) {
  if (value < 0 || value > 3) throw DataError("level out of range: " + std::to_string(value));
  return static_cast<Level>(value);
}

Label label_from_string(std::string_view text) {
  if (text == "positive") return Label::positive;
  if (text == "negative") return Label::negative;
  throw DataError("unknown label: " + std::string(text));
}

Condition condition_from_string(std::string_view text) {
  if (text == "direct") return Condition::direct;
  if (text == "with_knowledge") return Condition::with_knowledge;
  throw DataError("unknown condition: " + std::string(text));
}

void check_invariants(const KnowledgeRecord& record) {
  if (record.label && !record.level)
    throw DataError("knowledge " + record.kid + ": label set without level");
  if (record.label && *record.label != label_for(*record.level))
    throw DataError("knowledge " + record.kid + ": label disagrees with level");
  if (record.score && !(*record.score >= 0.0 && *record.score <= 1.0))
    throw DataError("knowledge " + record.kid + ": score outside [0,1]");
  if (record.sample_index < 0) throw DataError("knowledge " + record.kid + ": negative sample_index");
}

}  // namespace linked
