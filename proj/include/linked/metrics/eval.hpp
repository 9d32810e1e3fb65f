#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "linked/core/serialization.hpp"
#include "linked/reasoning/reasoner.hpp"

namespace linked::metrics {

using reasoning::ReasoningOutcome;

// Fraction of outcomes marked correct. Throws DataError on an empty list or
// a repeated qid.
double accuracy(std::span<const ReasoningOutcome> outcomes);

// Effectiveness / preservation against the few-shot baseline. Q_false are
// the questions the baseline got wrong, Q_true the ones it got right.
//   es  = |method correct within Q_false| / |Q_false|
//   ps  = 1 - |method wrong within Q_true| / |Q_true|
//   eps = harmonic mean of es and ps (0 when both are 0)
// A score whose set is empty stays unset, and so does eps; `note` says why.
struct EpsScores {
  std::optional<double> es;
  std::optional<double> ps;
  std::optional<double> eps;
  std::size_t q_true = 0;
  std::size_t q_false = 0;
  std::string note;
};

// Throws DataError when the two runs cover different qid sets.
EpsScores eps(std::span<const ReasoningOutcome> baseline, std::span<const ReasoningOutcome> method);

double harmonic_mean(double es, double ps);

struct QuestionResult {
  std::optional<int> final;
  bool correct = false;

  bool operator==(const QuestionResult&) const = default;
};

struct EvalReport {
  std::string method;
  std::string dataset_tag;
  double accuracy = 0.0;
  std::optional<double> es;
  std::optional<double> ps;
  std::optional<double> eps;
  std::size_t q_true_size = 0;
  std::size_t q_false_size = 0;
  double avg_tokens = 0.0;
  std::int64_t total_tokens = 0;
  std::map<std::string, QuestionResult> per_question;
  std::optional<std::uint64_t> seed;
  std::string note;
};

void to_json(Json& j, const EvalReport& r);

// Accuracy, EPS against `baseline`, and the average billed tokens per
// question for one method run.
EvalReport evaluate(const std::string& method, std::span<const ReasoningOutcome> baseline,
                    std::span<const ReasoningOutcome> outcomes, const std::string& dataset_tag = {});

// Plain-text comparison table, rows sorted by method name; ACC and EPS in
// percent, "-" where EPS is undefined.
std::string render_table(std::span<const EvalReport> runs);

// Writes <out>/report.json and <out>/report.txt. Throws DataError on an empty
// list or mixed dataset tags.
void report(std::span<const EvalReport> runs, const std::filesystem::path& out);

}  // namespace linked::metrics
