#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace linked {

// A multiple-choice item. `gold` is a 0-based index into `options`.
struct Question {
  std::string id;
  std::string stem;
  std::vector<std::string> options;
  int gold = 0;
  std::string dataset_tag;

  bool operator==(const Question&) const = default;
};

// Effect of a knowledge piece on answer correctness, from most to least
// useful: with the piece the model goes wrong->right (useful), stays right
// (harmless), stays wrong (useless), or goes right->wrong (harmful).
enum class Level : int { useful = 0, harmless = 1, useless = 2, harmful = 3 };

enum class Label { positive, negative };

enum class Condition { direct, with_knowledge };

// Levels 0 and 1 keep the model correct, so they count as positive evidence.
constexpr Label label_for(Level level) noexcept {
  return (level == Level::useful || level == Level::harmless) ? Label::positive : Label::negative;
}

struct KnowledgeRecord {
  std::string qid;
  std::string kid;
  std::string text;
  int sample_index = 0;
  double gen_temperature = 0.0;
  std::optional<Level> level;
  std::optional<Label> label;
  std::optional<double> score;

  bool operator==(const KnowledgeRecord&) const = default;
};

struct AnswerSample {
  std::string qid;
  Condition condition = Condition::direct;
  std::vector<std::string> rationale_ids;
  std::string raw_text;
  std::optional<int> parsed;
  bool valid = false;
  std::int64_t tokens_in = 0;
  std::int64_t tokens_out = 0;

  bool operator==(const AnswerSample&) const = default;
};

struct RunConfig {
  double knowledge_temperature = 1.3;
  int knowledge_samples = 5;
  double answer_temperature = 0.7;
  int answer_samples = 3;
  int top_k = 2;
  std::string llm_endpoint = "mock";
  std::optional<std::string> scorer_endpoint;
  std::string cache_dir;
  int concurrency_limit = 4;
  std::uint64_t seed = 0;

  std::string model = "gpt-3.5-turbo-0613";
  int max_retries = 3;
  int retry_backoff_ms = 500;
  int request_timeout_s = 60;

  // Throws ConfigError naming the first violated constraint.
  void validate() const;

  bool operator==(const RunConfig&) const = default;
};

std::string_view to_string(Level level);
std::string_view to_string(Label label);
std::string_view to_string(Condition condition);

Level level_from_int(int value);
Label label_from_string(std::string_view text);
Condition condition_from_string(std::string_view text);

// Checks the cross-field invariants of a knowledge record.
void check_invariants(const KnowledgeRecord& record);

}  // namespace linked
