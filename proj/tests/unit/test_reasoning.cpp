#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "linked/core/errors.hpp"
#include "linked/llm/gateway.hpp"
#include "linked/llm/mock.hpp"
#include "linked/reasoning/reasoner.hpp"
#include "linked/util/log.hpp"
#include "support.hpp"

using namespace linked;
using namespace linked::reasoning;
using llm::PromptTag;

namespace {

struct QuietLogs {
  QuietLogs() { util::set_logging(false); }
} quiet_logs;

std::vector<AnswerSample> votes(std::initializer_list<std::optional<int>> parsed) {
  std::vector<AnswerSample> out;
  for (const auto& p : parsed) {
    AnswerSample s;
    s.qid = "q";
    s.parsed = p;
    s.valid = p.has_value();
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<KnowledgeRecord> pool_for(const Question& q, int n) {
  std::vector<KnowledgeRecord> out;
  for (int i = 0; i < n; ++i) {
    KnowledgeRecord r;
    r.qid = q.id;
    r.kid = "k0" + std::to_string(i);
    r.text = "piece " + std::to_string(i);
    r.level = i % 2 ? Level::harmful : Level::useful;
    r.label = label_for(*r.level);
    out.push_back(std::move(r));
  }
  return out;
}

struct Harness {
  std::vector<Question> qs = llm::synthetic_dataset(1, 4);
  std::shared_ptr<testing::CountingBackend> counting =
      std::make_shared<testing::CountingBackend>(std::make_shared<llm::MockBackend>(llm::MockWorldSpec{}, qs));
  llm::Gateway gw{counting, llm::GatewayOptions{.use_cache = false}};
  scoring::OracleScorer oracle;
  RunConfig cfg;

  ReasoningOutcome run(Strategy s, int pool_size = 3) {
    const auto pool = pool_for(qs[0], pool_size);
    std::vector<scoring::ScoredKnowledge> scored;
    if (uses_pool(s)) scored = scoring::score_batch(qs[0], pool, oracle);
    return run_strategy(qs[0], scored, cfg, gw, s);
  }
};

}  // namespace

TEST_CASE("majority vote: plurality with the lowest index on ties") {
  CHECK(majority_vote(votes({0, 1, 1})) == 1);
  CHECK(majority_vote(votes({1, 0})) == 0);
  CHECK(majority_vote(votes({2, 1, 2, 1})) == 1);
  CHECK(majority_vote(votes({std::nullopt, 2, std::nullopt})) == 2);
  CHECK_FALSE(majority_vote(votes({std::nullopt, std::nullopt})));
  CHECK_FALSE(majority_vote(votes({})));
  CHECK(vote_histogram(votes({0, std::nullopt, 0, 3})) == std::map<int, int>{{0, 2}, {3, 1}});
}

TEST_CASE("property: the vote winner has the maximal count and no smaller index ties it") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<AnswerSample> samples;
    for (std::size_t n = rng() % 9; n > 0; --n) {
      AnswerSample s;
      s.qid = "q";
      if (rng() % 5) s.parsed = static_cast<int>(rng() % 4);
      s.valid = s.parsed.has_value();
      samples.push_back(std::move(s));
    }
    const auto hist = vote_histogram(samples);
    const auto winner = majority_vote(samples);
    if (hist.empty()) {
      CHECK_FALSE(winner);
      continue;
    }
    REQUIRE(winner);
    const int best = hist.at(*winner);
    for (const auto& [option, count] : hist) {
      CHECK(count <= best);
      if (option < *winner) CHECK(count < best);
    }
  }
}

TEST_CASE("call and sample counts per strategy") {
  struct Expect {
    Strategy s;
    int gen_calls, answer_calls, answer_samples;
    std::size_t outcome_samples;
  };
  // n = 3 answer samples, top_k = 2
  const std::vector<Expect> table{
      {Strategy::few_shot, 0, 1, 1, 1}, {Strategy::cot, 1, 1, 1, 1}, {Strategy::cot_sc, 3, 3, 3, 3},
      {Strategy::oo, 0, 1, 1, 1},       {Strategy::om, 0, 1, 3, 3},  {Strategy::mcr, 0, 1, 3, 3},
      {Strategy::mo, 0, 3, 3, 3},       {Strategy::mm, 0, 3, 9, 9},
  };
  for (const auto& e : table) {
    CAPTURE(to_string(e.s));
    Harness h;
    const auto o = h.run(e.s);
    const PromptTag answer_tag = e.s == Strategy::few_shot ? PromptTag::direct_answer : PromptTag::knowledge_answer;
    CHECK(h.counting->calls(PromptTag::knowledge_gen) == e.gen_calls);
    CHECK(h.counting->calls(answer_tag) == e.answer_calls);
    CHECK(h.counting->samples(answer_tag) == e.answer_samples);
    CHECK(o.samples.size() == e.outcome_samples);
    CHECK(o.strategy == e.s);
    CHECK(o.qid == h.qs[0].id);
    CHECK(o.final == majority_vote(o.samples));
    CHECK(o.correct == (o.final == h.qs[0].gold));
    CHECK(o.tokens_total > 0);
  }
}

TEST_CASE("tokens_total bills every call, rationale generation included") {
  Harness h;
  const auto o = h.run(Strategy::cot_sc);
  CHECK(o.tokens_total == h.gw.ledger().total_tokens());
  std::int64_t answers = 0;
  for (const auto& s : o.samples) answers += s.tokens_in + s.tokens_out;
  CHECK(o.tokens_total > answers);
}

TEST_CASE("chains carry their own rationale ids") {
  Harness h;
  const auto o = h.run(Strategy::cot_sc);
  for (std::size_t i = 0; i < o.samples.size(); ++i) {
    CHECK(o.samples[i].condition == Condition::with_knowledge);
    CHECK(o.samples[i].rationale_ids == std::vector<std::string>{"chain-" + std::to_string(i)});
  }
  Harness one;
  CHECK(one.run(Strategy::cot).samples.front().rationale_ids == std::vector<std::string>{"chain-0"});
}

TEST_CASE("mcr conditions every answer on the same top-k rationale") {
  Harness h;
  const auto o = h.run(Strategy::mcr, 4);
  // Oracle: k00 and k02 are positive, tie-broken by kid.
  for (const auto& s : o.samples) CHECK(s.rationale_ids == std::vector<std::string>{"k00", "k02"});
  const auto requests = h.counting->requests();
  REQUIRE(requests.size() == 1);
  CHECK(requests[0].n_samples == 3);
  CHECK(requests[0].messages.back().content.find("piece 0\npiece 2") != std::string::npos);

  Harness h1;
  h1.cfg.top_k = 1;
  for (const auto& s : h1.run(Strategy::mcr).samples) CHECK(s.rationale_ids == std::vector<std::string>{"k00"});
}

TEST_CASE("mo and mm take single pieces by rank and recycle a short pool") {
  Harness h;
  h.cfg.answer_samples = 5;
  const auto o = h.run(Strategy::mo, 2);  // ranks: k00, k01
  std::vector<std::string> ids;
  for (const auto& s : o.samples) ids.push_back(s.rationale_ids.at(0));
  CHECK(ids == std::vector<std::string>{"k00", "k01", "k00", "k01", "k00"});

  Harness m;
  m.cfg.answer_samples = 2;
  const auto mm = m.run(Strategy::mm, 3);
  ids.clear();
  for (const auto& s : mm.samples) ids.push_back(s.rationale_ids.at(0));
  CHECK(ids == std::vector<std::string>{"k00", "k00", "k02", "k02"});
}

TEST_CASE("strategies share draws: oo is the first mcr sample") {
  Harness a, b;
  const auto oo = a.run(Strategy::oo);
  const auto mcr_run = b.run(Strategy::mcr);
  CHECK(oo.samples.front() == mcr_run.samples.front());
}

TEST_CASE("pool strategies need scored knowledge") {
  Harness h;
  CHECK_THROWS_AS(run_strategy(h.qs[0], {}, h.cfg, h.gw, Strategy::mcr), DataError);
  CHECK_NOTHROW(run_strategy(h.qs[0], {}, h.cfg, h.gw, Strategy::cot));
}

TEST_CASE("reason_all flags questions without knowledge and unparseable answers") {
  const auto qs = llm::synthetic_dataset(3, 2);
  const auto pool = pool_for(qs[1], 3);
  scoring::OracleScorer oracle;
  RunConfig cfg;

  llm::Gateway gw(std::make_shared<llm::MockBackend>(llm::MockWorldSpec{}, qs));
  const auto run = reason_all(qs, pool, &oracle, cfg, gw, Strategy::mcr);
  REQUIRE(run.outcomes.size() == 3);
  CHECK(run.outcomes[0].note == "no knowledge in pool");
  CHECK_FALSE(run.outcomes[0].correct);
  CHECK_FALSE(run.outcomes[0].final);
  CHECK(run.outcomes[0].samples.empty());
  CHECK(run.outcomes[1].samples.size() == 3);
  CHECK(run.outcomes[2].note == "no knowledge in pool");
  REQUIRE(run.scored.size() == 3);
  for (const auto& r : run.scored) CHECK(r.score);

  CHECK_THROWS_AS(reason_all(qs, pool, nullptr, cfg, gw, Strategy::mcr), ConfigError);
  CHECK_NOTHROW(reason_all(qs, {}, nullptr, cfg, gw, Strategy::few_shot));

  llm::Gateway mumble(std::make_shared<testing::ScriptedBackend>(
      [](const llm::ChatRequest&, int) { return std::string("I cannot decide."); }));
  const auto flagged = reason_all(qs, {}, nullptr, cfg, mumble, Strategy::cot_sc);
  for (const auto& o : flagged.outcomes) {
    CHECK_FALSE(o.final);
    CHECK_FALSE(o.correct);
    CHECK(o.note == "no valid answer");
    CHECK(o.vote_histogram.empty());
    CHECK(o.samples.size() == 3);
  }
}

TEST_CASE("outcomes survive a JSON round trip") {
  const auto qs = llm::synthetic_dataset(6, 3);
  std::vector<KnowledgeRecord> pool;
  for (const auto& q : qs)
    for (auto& r : pool_for(q, 3)) pool.push_back(std::move(r));
  scoring::OracleScorer oracle;
  llm::Gateway gw(std::make_shared<llm::MockBackend>(llm::MockWorldSpec{}, qs));
  for (auto s : {Strategy::few_shot, Strategy::cot_sc, Strategy::mm}) {
    for (const auto& o : reason_all(qs, pool, &oracle, RunConfig{}, gw, s).outcomes)
      CHECK(Json::parse(Json(o).dump()).get<ReasoningOutcome>() == o);
  }
  CHECK_THROWS_AS(strategy_from_string("tot"), ConfigError);
  for (auto s : {Strategy::few_shot, Strategy::cot, Strategy::cot_sc, Strategy::mcr, Strategy::oo, Strategy::om,
                 Strategy::mo, Strategy::mm})
    CHECK(strategy_from_string(to_string(s)) == s);
}
