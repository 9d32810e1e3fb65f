#include "linked/reasoning/reasoner.hpp"

#include <algorithm>
#include <unordered_map>

#include "linked/core/errors.hpp"
#include "linked/knowledge/pool.hpp"
#include "linked/llm/prompts.hpp"
#include "linked/util/parallel.hpp"

namespace linked::reasoning {
namespace {

constexpr std::string_view kStage = "reason";

struct Accumulator {
  std::vector<AnswerSample> samples;
  std::int64_t tokens = 0;

  void add(std::vector<AnswerSample> batch) {
    for (auto& s : batch) {
      tokens += s.tokens_in + s.tokens_out;
      samples.push_back(std::move(s));
    }
  }
};

ReasoningOutcome finish(const Question& q, Strategy strategy, Accumulator acc) {
  ReasoningOutcome o;
  o.qid = q.id;
  o.strategy = strategy;
  o.vote_histogram = vote_histogram(acc.samples);
  o.final = majority_vote(acc.samples);
  o.correct = o.final && *o.final == q.gold;
  o.tokens_total = acc.tokens;
  if (!o.final) o.note = "no valid answer";
  o.samples = std::move(acc.samples);
  return o;
}

// One self-generated rationale followed by one answer conditioned on it.
void run_chain(const Question& q, int chain, const RunConfig& cfg, llm::Gateway& gateway,
               Accumulator& acc) {
  auto req = llm::make_request(q, llm::PromptTag::knowledge_gen, std::nullopt, cfg.answer_temperature, 1,
                               std::string(kStage), chain);
  const auto resp = gateway.complete(req);
  acc.tokens += resp.tokens_in + resp.tokens_out;
  const knowledge::Rationale rationale{resp.completions.front(), {"chain-" + std::to_string(chain)}};
  acc.add(knowledge::sample_answers(q, &rationale, 1, chain, cfg.answer_temperature, kStage, gateway));
}

void require_pool(const Question& q, std::span<const scoring::ScoredKnowledge> scored) {
  if (scored.empty()) throw DataError("question " + q.id + ": no scored knowledge to reason with");
}

}  // namespace

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::few_shot: return "few_shot";
    case Strategy::cot: return "cot";
    case Strategy::cot_sc: return "cot_sc";
    case Strategy::mcr: return "mcr";
    case Strategy::oo: return "oo";
    case Strategy::om: return "om";
    case Strategy::mo: return "mo";
    case Strategy::mm: return "mm";
  }
  return "?";
}

Strategy strategy_from_string(std::string_view text) {
  for (auto s : {Strategy::few_shot, Strategy::cot, Strategy::cot_sc, Strategy::mcr, Strategy::oo,
                 Strategy::om, Strategy::mo, Strategy::mm}) {
    if (to_string(s) == text) return s;
  }
  throw ConfigError("unknown strategy: " + std::string(text));
}

bool uses_pool(Strategy s) {
  return s == Strategy::mcr || s == Strategy::oo || s == Strategy::om || s == Strategy::mo || s == Strategy::mm;
}

void to_json(Json& j, const ReasoningOutcome& o) {
  j = Json::object();
  j["qid"] = o.qid;
  j["strategy"] = std::string(to_string(o.strategy));
  j["samples"] = o.samples;
  Json hist = Json::object();
  for (const auto& [option, count] : o.vote_histogram) hist[std::to_string(option)] = count;
  j["vote_histogram"] = std::move(hist);
  j["final"] = o.final ? Json(*o.final) : Json(nullptr);
  j["correct"] = o.correct;
  j["tokens_total"] = o.tokens_total;
  j["note"] = o.note.empty() ? Json(nullptr) : Json(o.note);
}

void from_json(const Json& j, ReasoningOutcome& o) {
  o.qid = j.at("qid").get<std::string>();
  o.strategy = strategy_from_string(j.at("strategy").get<std::string>());
  o.samples = j.at("samples").get<std::vector<AnswerSample>>();
  o.vote_histogram.clear();
  for (auto it = j.at("vote_histogram").begin(); it != j.at("vote_histogram").end(); ++it)
    o.vote_histogram[std::stoi(it.key())] = it.value().get<int>();
  const auto& final = j.at("final");
  o.final = final.is_null() ? std::nullopt : std::optional(final.get<int>());
  o.correct = j.at("correct").get<bool>();
  o.tokens_total = j.at("tokens_total").get<std::int64_t>();
  const auto note = j.find("note");
  o.note = (note == j.end() || note->is_null()) ? std::string() : note->get<std::string>();
}

std::map<int, int> vote_histogram(std::span<const AnswerSample> samples) {
  std::map<int, int> hist;
  for (const auto& s : samples)
    if (s.valid && s.parsed) ++hist[*s.parsed];
  return hist;
}

std::optional<int> majority_vote(std::span<const AnswerSample> samples) {
  std::optional<int> best;
  int best_count = 0;
  // Ascending key order: a later option must strictly beat the count to win.
  for (const auto& [option, count] : vote_histogram(samples)) {
    if (count > best_count) {
      best = option;
      best_count = count;
    }
  }
  return best;
}

ReasoningOutcome mcr(const Question& q, std::span<const scoring::ScoredKnowledge> scored,
                     const RunConfig& cfg, llm::Gateway& gateway) {
  return run_strategy(q, scored, cfg, gateway, Strategy::mcr);
}

ReasoningOutcome run_strategy(const Question& q, std::span<const scoring::ScoredKnowledge> scored,
                              const RunConfig& cfg, llm::Gateway& gateway, Strategy strategy) {
  const int n = cfg.answer_samples;
  const double temperature = cfg.answer_temperature;
  Accumulator acc;
  switch (strategy) {
    case Strategy::few_shot:
      acc.add(knowledge::sample_answers(q, nullptr, 1, 0, temperature, kStage, gateway));
      break;
    case Strategy::cot:
      run_chain(q, 0, cfg, gateway, acc);
      break;
    case Strategy::cot_sc:
      for (int chain = 0; chain < n; ++chain) run_chain(q, chain, cfg, gateway, acc);
      break;
    case Strategy::oo:
    case Strategy::om:
    case Strategy::mcr: {
      require_pool(q, scored);
      const auto rationale = scoring::select_rationale(scored, cfg.top_k);
      const int answers = strategy == Strategy::oo ? 1 : n;
      acc.add(knowledge::sample_answers(q, &rationale, answers, 0, temperature, kStage, gateway));
      break;
    }
    case Strategy::mo:
    case Strategy::mm: {
      require_pool(q, scored);
      const auto ranked = scoring::by_rank(scored);
      const int answers = strategy == Strategy::mo ? 1 : n;
      for (int r = 0; r < n; ++r) {
        const auto& piece = ranked[static_cast<std::size_t>(r) % ranked.size()].record;
        const knowledge::Rationale rationale{piece.text, {piece.kid}};
        acc.add(knowledge::sample_answers(q, &rationale, answers, r * answers, temperature, kStage, gateway));
      }
      break;
    }
  }
  return finish(q, strategy, std::move(acc));
}

ReasonRun reason_all(std::span<const Question> questions, std::span<const KnowledgeRecord> pool,
                     scoring::Scorer* scorer, const RunConfig& cfg, llm::Gateway& gateway,
                     Strategy strategy) {
  cfg.validate();
  const bool needs_pool = uses_pool(strategy);
  if (needs_pool && !scorer) throw ConfigError("strategy " + std::string(to_string(strategy)) + " needs a scorer");

  std::unordered_map<std::string, std::vector<KnowledgeRecord>> grouped;
  if (needs_pool)
    for (const auto& r : pool) grouped[r.qid].push_back(r);

  std::vector<ReasoningOutcome> outcomes(questions.size());
  std::vector<std::vector<KnowledgeRecord>> scored_records(questions.size());
  util::parallel_for(questions.size(), static_cast<std::size_t>(cfg.concurrency_limit), [&](std::size_t i) {
    const Question& q = questions[i];
    std::vector<scoring::ScoredKnowledge> scored;
    if (needs_pool) {
      auto it = grouped.find(q.id);
      if (it == grouped.end() || it->second.empty()) {
        outcomes[i].qid = q.id;
        outcomes[i].strategy = strategy;
        outcomes[i].note = "no knowledge in pool";
        return;
      }
      scored = scoring::score_batch(q, it->second, *scorer);
      for (const auto& s : scored) scored_records[i].push_back(s.record);
    }
    outcomes[i] = run_strategy(q, scored, cfg, gateway, strategy);
  });

  ReasonRun run;
  run.outcomes = std::move(outcomes);
  for (auto& group : scored_records)
    for (auto& r : group) run.scored.push_back(std::move(r));
  return run;
}

}  // namespace linked::reasoning
