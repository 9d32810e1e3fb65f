#include "linked/scoring/scorer.hpp"

#include <algorithm>
#include <numeric>
#include <thread>

#include <httplib.h>

#include "linked/core/errors.hpp"
#include "linked/llm/http_backend.hpp"
#include "linked/llm/prompts.hpp"

namespace linked::scoring {

double oracle_score(const KnowledgeRecord& record) {
  if (!record.label) throw ScorerError("oracle scorer: knowledge " + record.qid + "/" + record.kid + " is unlabeled");
  return *record.label == Label::positive ? 1.0 : 0.0;
}

std::vector<double> OracleScorer::score(const Question&, std::span<const KnowledgeRecord> records) {
  std::vector<double> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(oracle_score(r));
  return out;
}

std::vector<double> ConstantScorer::score(const Question&, std::span<const KnowledgeRecord> records) {
  return std::vector<double>(records.size(), value_);
}

RemoteScorer::RemoteScorer(RemoteScorerOptions options) : options_(std::move(options)) {
  const auto endpoint = llm::Endpoint::parse(options_.endpoint);
  origin_ = endpoint.origin;
  prefix_ = endpoint.prefix;
}

Json RemoteScorer::build_body(const Question& q, std::span<const KnowledgeRecord> records) {
  const std::string question = llm::render_question_text(q);
  Json pairs = Json::array();
  for (const auto& r : records) pairs.push_back(Json{{"question", question}, {"knowledge", r.text}});
  return Json{{"pairs", std::move(pairs)}};
}

std::vector<double> RemoteScorer::parse_body(const std::string& body) {
  try {
    const Json j = Json::parse(body);
    return j.at("scores").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw ScorerError(std::string("malformed scorer response: ") + e.what());
  }
}

std::vector<double> RemoteScorer::score(const Question& q, std::span<const KnowledgeRecord> records) {
  httplib::Client client(origin_);
  client.set_connection_timeout(options_.timeout);
  client.set_read_timeout(options_.timeout);
  const std::string body = build_body(q, records).dump();
  std::string last_error;
  for (int attempt = 0; attempt <= options_.max_retries; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(options_.backoff * (1 << (attempt - 1)));
    auto res = client.Post(prefix_ + "/score", body, "application/json");
    if (!res) {
      last_error = "scorer unreachable at " + origin_ + ": " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 429 || res->status >= 500) {
      last_error = "scorer error (HTTP " + std::to_string(res->status) + ")";
      continue;
    }
    if (res->status != 200)
      throw ScorerError("scorer rejected request (HTTP " + std::to_string(res->status) + "): " +
                        res->body.substr(0, 200));
    return parse_body(res->body);
  }
  throw ScorerError(last_error);
}

bool RemoteScorer::healthy() const {
  httplib::Client client(origin_);
  client.set_connection_timeout(std::chrono::seconds(5));
  client.set_read_timeout(std::chrono::seconds(5));
  auto res = client.Get(prefix_ + "/healthz");
  return res && res->status == 200;
}

std::vector<ScoredKnowledge> rank_records(std::span<const KnowledgeRecord> records) {
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), 0);
  for (const auto& r : records)
    if (!r.score) throw ScorerError("knowledge " + r.kid + " has no score");
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double sa = *records[a].score;
    const double sb = *records[b].score;
    if (sa != sb) return sa > sb;
    return records[a].kid < records[b].kid;
  });
  std::vector<ScoredKnowledge> out(records.size());
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    out[order[pos]].record = records[order[pos]];
    out[order[pos]].rank = static_cast<int>(pos) + 1;
  }
  return out;
}

std::vector<ScoredKnowledge> score_batch(const Question& q, std::span<const KnowledgeRecord> records,
                                         Scorer& scorer) {
  if (records.empty()) throw ScorerError("question " + q.id + ": nothing to score");
  for (const auto& r : records)
    if (r.qid != q.id) throw ScorerError("knowledge " + r.kid + " belongs to " + r.qid + ", not " + q.id);

  const auto scores = scorer.score(q, records);
  if (scores.size() != records.size())
    throw ScorerError("scorer returned " + std::to_string(scores.size()) + " scores for " +
                      std::to_string(records.size()) + " pairs");
  std::vector<KnowledgeRecord> scored(records.begin(), records.end());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!(scores[i] >= 0.0 && scores[i] <= 1.0))
      throw ScorerError("scorer returned " + std::to_string(scores[i]) + " outside [0,1]");
    scored[i].score = scores[i];
  }
  return rank_records(scored);
}

std::vector<ScoredKnowledge> by_rank(std::span<const ScoredKnowledge> scored) {
  std::vector<ScoredKnowledge> out(scored.begin(), scored.end());
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.rank < b.rank; });
  return out;
}

knowledge::Rationale select_rationale(std::span<const ScoredKnowledge> scored, int top_k) {
  const auto ranked = by_rank(scored);
  const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(std::max(top_k, 1)), ranked.size());
  knowledge::Rationale out;
  for (std::size_t i = 0; i < take; ++i) {
    if (i) out.text += '\n';
    out.text += ranked[i].record.text;
    out.ids.push_back(ranked[i].record.kid);
  }
  return out;
}

}  // namespace linked::scoring
