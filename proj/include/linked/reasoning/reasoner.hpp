#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "linked/core/serialization.hpp"
#include "linked/core/types.hpp"
#include "linked/llm/gateway.hpp"
#include "linked/scoring/scorer.hpp"

namespace linked::reasoning {

// few_shot: one direct answer. cot: one generated rationale, one answer.
// cot_sc: n independent rationale+answer chains, voted. oo/om: the top-k
// rationale with 1 / n answers. mo/mm: n single-piece rationales taken by
// rank with 1 / n answers each, all voted together. mcr is om.
enum class Strategy { few_shot, cot, cot_sc, mcr, oo, om, mo, mm };

std::string_view to_string(Strategy s);
Strategy strategy_from_string(std::string_view text);
bool uses_pool(Strategy s);

struct ReasoningOutcome {
  std::string qid;
  Strategy strategy = Strategy::few_shot;
  std::vector<AnswerSample> samples;
  std::map<int, int> vote_histogram;  // option index -> votes among valid samples
  std::optional<int> final;
  bool correct = false;
  std::int64_t tokens_total = 0;  // billed tokens of every call made for this question
  std::string note;               // set when the outcome is flagged (e.g. no valid sample)

  bool operator==(const ReasoningOutcome&) const = default;
};

void to_json(Json& j, const ReasoningOutcome& o);
void from_json(const Json& j, ReasoningOutcome& o);

std::map<int, int> vote_histogram(std::span<const AnswerSample> samples);

// Most frequent option among valid samples, lowest index on ties; nullopt
// when no sample is valid.
std::optional<int> majority_vote(std::span<const AnswerSample> samples);

// Marginal consistent reasoning: fixes one rationale built from the top-k
// scored pieces and votes over cfg.answer_samples answers conditioned on it.
ReasoningOutcome mcr(const Question& q, std::span<const scoring::ScoredKnowledge> scored,
                     const RunConfig& cfg, llm::Gateway& gateway);

// `scored` may be empty for strategies that ignore the pool.
ReasoningOutcome run_strategy(const Question& q, std::span<const scoring::ScoredKnowledge> scored,
                              const RunConfig& cfg, llm::Gateway& gateway, Strategy strategy);

struct ReasonRun {
  std::vector<ReasoningOutcome> outcomes;  // dataset order
  std::vector<KnowledgeRecord> scored;     // pool with scores, dataset order
};

// Runs `strategy` over every question. Knowledge strategies score each
// question's pool first; a question with no pool gets a flagged, incorrect
// outcome instead of failing the run.
ReasonRun reason_all(std::span<const Question> questions, std::span<const KnowledgeRecord> pool,
                     scoring::Scorer* scorer, const RunConfig& cfg, llm::Gateway& gateway,
                     Strategy strategy);

}  // namespace linked::reasoning
