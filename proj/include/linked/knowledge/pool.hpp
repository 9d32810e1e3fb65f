#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "linked/core/types.hpp"
#include "linked/llm/gateway.hpp"

namespace linked::knowledge {

// Extracts the chosen option from a completion. The last "Answer ... (n)" /
// "Answer: n" wins; without one, a lone leading option number is accepted.
// A number outside 1..n_options is rejected. Returns a 0-based index.
std::optional<int> parse_answer(std::string_view raw, int n_options);

// As above, falling back to the unique option whose full text appears in
// the final non-empty line.
std::optional<int> parse_answer(std::string_view raw, std::span<const std::string> options);

// Unparseable samples count as wrong. Throws DataError when the samples
// belong to different questions or carry the wrong conditions.
Level assign_level(const AnswerSample& direct, const AnswerSample& with_k, int gold);

// Knowledge used to condition an answer: the text shown to the model and
// the ids of the pieces it was built from.
struct Rationale {
  std::string text;
  std::vector<std::string> ids;
};

// Stage names separate the draw streams of pipeline stages that send
// identical prompts (see llm::ChatRequest::stage).
namespace stage {
inline constexpr std::string_view elicit = "elicit";
inline constexpr std::string_view label = "label";
}  // namespace stage

// cfg.knowledge_samples pieces at cfg.knowledge_temperature, level/label/score
// unset. Blank completions are regenerated once and dropped if still blank;
// throws ElicitationError if nothing usable remains.
std::vector<KnowledgeRecord> elicit_knowledge(const Question& q, const RunConfig& cfg,
                                              llm::Gateway& gateway);

// `n` answers drawn in one request at `temperature`, numbered from
// `first_sample`, all conditioned on the same rationale (or none).
std::vector<AnswerSample> sample_answers(const Question& q, const Rationale* rationale, int n,
                                         int first_sample, double temperature,
                                         std::string_view stage, llm::Gateway& gateway);

// One answer at cfg.answer_temperature, direct when `rationale` is null.
AnswerSample answer(const Question& q, const Rationale* rationale, const RunConfig& cfg,
                    llm::Gateway& gateway, std::string_view stage = stage::label);

struct LabeledQuestion {
  std::vector<KnowledgeRecord> records;  // level and label set
  std::vector<AnswerSample> samples;     // the direct answer first, then one per record
};

// Answers `q` once directly and once per knowledge piece, then levels each
// piece. The direct answer is shared by all pieces.
LabeledQuestion label_question(const Question& q, std::vector<KnowledgeRecord> records,
                               const RunConfig& cfg, llm::Gateway& gateway);

struct PoolFailure {
  std::string qid;
  std::string reason;
};

struct PoolBuild {
  std::vector<KnowledgeRecord> records;
  std::vector<AnswerSample> samples;
  std::vector<PoolFailure> failures;
};

// Elicitation across a dataset; output in dataset order. Questions whose
// elicitation fails are reported in `failures` and skipped.
struct ElicitResult {
  std::vector<KnowledgeRecord> records;
  std::vector<PoolFailure> failures;
};
ElicitResult elicit_all(std::span<const Question> questions, const RunConfig& cfg,
                        llm::Gateway& gateway);

// Labels an elicited pool. Records whose qid is not in `questions` raise
// DataError.
PoolBuild label_pool(std::span<const Question> questions, std::span<const KnowledgeRecord> pool,
                     const RunConfig& cfg, llm::Gateway& gateway);

// Elicit + label for every question, questions processed concurrently up to
// cfg.concurrency_limit.
PoolBuild build_pool(std::span<const Question> questions, const RunConfig& cfg,
                     llm::Gateway& gateway);

}  // namespace linked::knowledge
