#include "linked/metrics/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <unordered_map>
#include <unordered_set>

#include "linked/core/errors.hpp"
#include "linked/core/stage_io.hpp"

namespace linked::metrics {
namespace {

std::unordered_map<std::string, bool> correctness_by_qid(std::span<const ReasoningOutcome> outcomes,
                                                         const char* which) {
  std::unordered_map<std::string, bool> out;
  for (const auto& o : outcomes) {
    if (!out.emplace(o.qid, o.correct).second)
      throw DataError(std::string(which) + " run repeats question " + o.qid);
  }
  return out;
}

std::string percent(std::optional<double> value) {
  if (!value) return "-";
  char buf[16];
  std::snprintf(buf, sizeof buf, "%.1f", *value * 100.0);
  return buf;
}

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

}  // namespace

double accuracy(std::span<const ReasoningOutcome> outcomes) {
  if (outcomes.empty()) throw DataError("accuracy of an empty run");
  const auto by_qid = correctness_by_qid(outcomes, "method");
  const auto correct = std::count_if(outcomes.begin(), outcomes.end(), [](const auto& o) { return o.correct; });
  return static_cast<double>(correct) / static_cast<double>(by_qid.size());
}

double harmonic_mean(double es, double ps) { return es + ps == 0.0 ? 0.0 : 2.0 * es * ps / (es + ps); }

EpsScores eps(std::span<const ReasoningOutcome> baseline, std::span<const ReasoningOutcome> method) {
  const auto base = correctness_by_qid(baseline, "baseline");
  const auto meth = correctness_by_qid(method, "method");
  if (base.size() != meth.size()) throw DataError("baseline and method cover different questions");

  std::size_t fixed = 0;   // method correct on Q_false
  std::size_t broken = 0;  // method wrong on Q_true
  EpsScores out;
  for (const auto& [qid, base_correct] : base) {
    auto it = meth.find(qid);
    if (it == meth.end()) throw DataError("question " + qid + " missing from method run");
    if (base_correct) {
      ++out.q_true;
      if (!it->second) ++broken;
    } else {
      ++out.q_false;
      if (it->second) ++fixed;
    }
  }
  if (out.q_false > 0) out.es = static_cast<double>(fixed) / static_cast<double>(out.q_false);
  if (out.q_true > 0) out.ps = 1.0 - static_cast<double>(broken) / static_cast<double>(out.q_true);
  if (out.es && out.ps) {
    out.eps = harmonic_mean(*out.es, *out.ps);
  } else {
    out.note = out.q_false == 0 ? "baseline answered every question correctly; ES undefined"
                                : "baseline answered every question wrongly; PS undefined";
  }
  return out;
}

void to_json(Json& j, const EvalReport& r) {
  auto opt = [](const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); };
  j = Json::object();
  j["method"] = r.method;
  j["dataset_tag"] = r.dataset_tag;
  j["accuracy"] = r.accuracy;
  j["es"] = opt(r.es);
  j["ps"] = opt(r.ps);
  j["eps"] = opt(r.eps);
  j["q_true_size"] = r.q_true_size;
  j["q_false_size"] = r.q_false_size;
  j["avg_tokens"] = r.avg_tokens;
  j["total_tokens"] = r.total_tokens;
  j["seed"] = r.seed ? Json(*r.seed) : Json(nullptr);
  j["note"] = r.note.empty() ? Json(nullptr) : Json(r.note);
  Json per = Json::object();
  for (const auto& [qid, res] : r.per_question)
    per[qid] = Json{{"final", res.final ? Json(*res.final) : Json(nullptr)}, {"correct", res.correct}};
  j["per_question"] = std::move(per);
}

EvalReport evaluate(const std::string& method, std::span<const ReasoningOutcome> baseline,
                    std::span<const ReasoningOutcome> outcomes, const std::string& dataset_tag) {
  EvalReport r;
  r.method = method;
  r.dataset_tag = dataset_tag;
  r.accuracy = accuracy(outcomes);
  const auto scores = eps(baseline, outcomes);
  r.es = scores.es;
  r.ps = scores.ps;
  r.eps = scores.eps;
  r.q_true_size = scores.q_true;
  r.q_false_size = scores.q_false;
  r.note = scores.note;
  for (const auto& o : outcomes) {
    r.total_tokens += o.tokens_total;
    r.per_question[o.qid] = {o.final, o.correct};
  }
  r.avg_tokens = static_cast<double>(r.total_tokens) / static_cast<double>(outcomes.size());
  return r;
}

std::string render_table(std::span<const EvalReport> runs) {
  std::vector<const EvalReport*> rows;
  for (const auto& r : runs) rows.push_back(&r);
  std::sort(rows.begin(), rows.end(), [](auto* a, auto* b) { return a->method < b->method; });

  std::size_t width = 6;
  for (auto* r : rows) width = std::max(width, r->method.size());
  width += 2;

  std::string out = pad("Method", width) + pad("ACC", 8) + pad("ES", 8) + pad("PS", 8) + pad("EPS", 8) + "AvgTokens\n";
  for (auto* r : rows) {
    char tokens[32];
    std::snprintf(tokens, sizeof tokens, "%.1f", r->avg_tokens);
    out += pad(r->method, width) + pad(percent(r->accuracy), 8) + pad(percent(r->es), 8) +
           pad(percent(r->ps), 8) + pad(percent(r->eps), 8) + tokens + "\n";
  }
  return out;
}

void report(std::span<const EvalReport> runs, const std::filesystem::path& out) {
  if (runs.empty()) throw DataError("report: no runs");
  for (const auto& r : runs)
    if (r.dataset_tag != runs.front().dataset_tag)
      throw DataError("report: runs come from different datasets (" + runs.front().dataset_tag + ", " +
                      r.dataset_tag + ")");

  std::vector<EvalReport> sorted(runs.begin(), runs.end());
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.method < b.method; });
  Json j = Json::object();
  j["dataset_tag"] = runs.front().dataset_tag;
  j["runs"] = sorted;

  std::error_code ec;
  std::filesystem::create_directories(out, ec);
  if (ec) throw IoError("cannot create report directory " + out.string() + ": " + ec.message());
  write_file_atomic(out / "report.json", j.dump(2) + "\n");
  write_file_atomic(out / "report.txt", render_table(sorted));
}

}  // namespace linked::metrics
