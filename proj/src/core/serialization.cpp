#include "linked/core/serialization.hpp"

#include "linked/core/errors.hpp"

namespace linked {
namespace {

template <typename T>
Json optional_to_json(const std::optional<T>& value) {
  return value ? Json(*value) : Json(nullptr);
}

const Json& require(const Json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw DataError(std::string("missing key \"") + key + "\"");
  return *it;
}

}  // namespace

void to_json(Json& j, const KnowledgeRecord& r) {
  j = Json::object();
  j["qid"] = r.qid;
  j["kid"] = r.kid;
  j["text"] = r.text;
  j["sample_index"] = r.sample_index;
  j["gen_temperature"] = r.gen_temperature;
  j["level"] = r.level ? Json(static_cast<int>(*r.level)) : Json(nullptr);
  j["label"] = r.label ? Json(std::string(to_string(*r.label))) : Json(nullptr);
  j["score"] = optional_to_json(r.score);
}

void from_json(const Json& j, KnowledgeRecord& r) {
  r.qid = require(j, "qid").get<std::string>();
  r.kid = require(j, "kid").get<std::string>();
  r.text = require(j, "text").get<std::string>();
  r.sample_index = require(j, "sample_index").get<int>();
  r.gen_temperature = require(j, "gen_temperature").get<double>();
  const auto& level = require(j, "level");
  r.level = level.is_null() ? std::nullopt : std::optional(level_from_int(level.get<int>()));
  const auto& label = require(j, "label");
  r.label = label.is_null() ? std::nullopt
                            : std::optional(label_from_string(label.get<std::string>()));
  const auto& score = require(j, "score");
  r.score = score.is_null() ? std::nullopt : std::optional(score.get<double>());
  check_invariants(r);
}

void to_json(Json& j, const AnswerSample& s) {
  j = Json::object();
  j["qid"] = s.qid;
  j["condition"] = std::string(to_string(s.condition));
  j["rationale_ids"] = s.rationale_ids;
  j["raw_text"] = s.raw_text;
  j["parsed"] = optional_to_json(s.parsed);
  j["valid"] = s.valid;
  j["tokens_in"] = s.tokens_in;
  j["tokens_out"] = s.tokens_out;
}

void from_json(const Json& j, AnswerSample& s) {
  s.qid = require(j, "qid").get<std::string>();
  s.condition = condition_from_string(require(j, "condition").get<std::string>());
  s.rationale_ids = require(j, "rationale_ids").get<std::vector<std::string>>();
  s.raw_text = require(j, "raw_text").get<std::string>();
  const auto& parsed = require(j, "parsed");
  s.parsed = parsed.is_null() ? std::nullopt : std::optional(parsed.get<int>());
  s.valid = require(j, "valid").get<bool>();
  s.tokens_in = require(j, "tokens_in").get<std::int64_t>();
  s.tokens_out = require(j, "tokens_out").get<std::int64_t>();
  if (s.valid != s.parsed.has_value()) throw DataError("answer sample: valid disagrees with parsed");
  if (s.condition == Condition::direct && !s.rationale_ids.empty())
    throw DataError("answer sample: direct answer carries rationale ids");
}

void to_json(Json& j, const Question& q) {
  j = Json::object();
  j["id"] = q.id;
  j["question"] = q.stem;
  j["options"] = q.options;
  j["answer"] = q.gold;
  if (!q.dataset_tag.empty()) j["dataset"] = q.dataset_tag;
}

void from_json(const Json& j, Question& q) {
  q.id = require(j, "id").get<std::string>();
  q.stem = require(j, "question").get<std::string>();
  q.options = require(j, "options").get<std::vector<std::string>>();
  q.gold = require(j, "answer").get<int>();
  if (auto it = j.find("dataset"); it != j.end()) q.dataset_tag = it->get<std::string>();
}

void to_json(Json& j, const RunConfig& c) {
  j = Json::object();
  j["knowledge_temperature"] = c.knowledge_temperature;
  j["knowledge_samples"] = c.knowledge_samples;
  j["answer_temperature"] = c.answer_temperature;
  j["answer_samples"] = c.answer_samples;
  j["top_k"] = c.top_k;
  j["llm_endpoint"] = c.llm_endpoint;
  j["scorer_endpoint"] = optional_to_json(c.scorer_endpoint);
  j["cache_dir"] = c.cache_dir;
  j["concurrency_limit"] = c.concurrency_limit;
  j["seed"] = c.seed;
  j["model"] = c.model;
  j["max_retries"] = c.max_retries;
  j["retry_backoff_ms"] = c.retry_backoff_ms;
  j["request_timeout_s"] = c.request_timeout_s;
}

void merge_from_json(const Json& j, RunConfig& c) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  auto take = [&](const char* key, auto& field) {
    if (auto it = j.find(key); it != j.end() && !it->is_null()) {
      try {
        field = it->get<std::remove_reference_t<decltype(field)>>();
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config key \"") + key + "\": " + e.what());
      }
    }
  };
  take("knowledge_temperature", c.knowledge_temperature);
  take("knowledge_samples", c.knowledge_samples);
  take("answer_temperature", c.answer_temperature);
  take("answer_samples", c.answer_samples);
  take("top_k", c.top_k);
  take("llm_endpoint", c.llm_endpoint);
  if (auto it = j.find("scorer_endpoint"); it != j.end()) {
    c.scorer_endpoint =
        it->is_null() ? std::nullopt : std::optional(it->get<std::string>());
  }
  take("cache_dir", c.cache_dir);
  take("concurrency_limit", c.concurrency_limit);
  take("seed", c.seed);
  take("model", c.model);
  take("max_retries", c.max_retries);
  take("retry_backoff_ms", c.retry_backoff_ms);
  take("request_timeout_s", c.request_timeout_s);
}

}  // namespace linked
