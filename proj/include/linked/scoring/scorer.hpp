#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "linked/core/serialization.hpp"
#include "linked/core/types.hpp"
#include "linked/knowledge/pool.hpp"

namespace linked::scoring {

struct ScoredKnowledge {
  KnowledgeRecord record;  // score set
  int rank = 0;            // 1-based within the question
};

// Rates knowledge pieces for one question. Implementations return one
// value in [0,1] per record, in input order.
class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual std::string name() const = 0;
  virtual std::vector<double> score(const Question& q, std::span<const KnowledgeRecord> records) = 0;
};

// 1.0 for positive, 0.0 for negative. Throws ScorerError on an unlabeled record.
double oracle_score(const KnowledgeRecord& record);

class OracleScorer final : public Scorer {
 public:
  std::string name() const override { return "oracle"; }
  std::vector<double> score(const Question& q, std::span<const KnowledgeRecord> records) override;
};

// Every record gets the same score; ranking falls back to kid order, which
// reproduces the "no filtering" ablation.
class ConstantScorer final : public Scorer {
 public:
  explicit ConstantScorer(double value = 0.5) : value_(value) {}
  std::string name() const override { return "constant"; }
  std::vector<double> score(const Question& q, std::span<const KnowledgeRecord> records) override;

 private:
  double value_;
};

// Test hook: scores come from an arbitrary callable.
class FunctionScorer final : public Scorer {
 public:
  using Fn = std::function<std::vector<double>(const Question&, std::span<const KnowledgeRecord>)>;
  FunctionScorer(std::string name, Fn fn) : name_(std::move(name)), fn_(std::move(fn)) {}
  std::string name() const override { return name_; }
  std::vector<double> score(const Question& q, std::span<const KnowledgeRecord> records) override {
    return fn_(q, records);
  }

 private:
  std::string name_;
  Fn fn_;
};

struct RemoteScorerOptions {
  std::string endpoint;
  std::chrono::seconds timeout{60};
  int max_retries = 3;
  std::chrono::milliseconds backoff{500};
};

// Client for the scoring service:
//   POST <endpoint>/score {"pairs":[{"question","knowledge"},...]} -> {"scores":[...]}
//   GET  <endpoint>/healthz -> 200
class RemoteScorer final : public Scorer {
 public:
  explicit RemoteScorer(RemoteScorerOptions options);
  std::string name() const override { return "remote"; }
  std::vector<double> score(const Question& q, std::span<const KnowledgeRecord> records) override;
  bool healthy() const;

  static Json build_body(const Question& q, std::span<const KnowledgeRecord> records);
  static std::vector<double> parse_body(const std::string& body);

 private:
  RemoteScorerOptions options_;
  std::string origin_;
  std::string prefix_;
};

// Scores and ranks one question's knowledge. The result keeps input order;
// rank 1 is the highest score, ties going to the lexicographically smaller
// kid. Throws ScorerError on a length mismatch or a score outside [0,1].
std::vector<ScoredKnowledge> score_batch(const Question& q, std::span<const KnowledgeRecord> records,
                                         Scorer& scorer);

// Assigns ranks to records that already carry scores.
std::vector<ScoredKnowledge> rank_records(std::span<const KnowledgeRecord> records);

// Concatenates the min(top_k, m) best-ranked texts in rank order, one per
// line, and lists their kids in the same order.
knowledge::Rationale select_rationale(std::span<const ScoredKnowledge> scored, int top_k);

// The records in rank order.
std::vector<ScoredKnowledge> by_rank(std::span<const ScoredKnowledge> scored);

}  // namespace linked::scoring
