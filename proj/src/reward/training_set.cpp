#include "linked/reward/training_set.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "linked/core/dataset.hpp"
#include "linked/core/errors.hpp"
#include "linked/core/stage_io.hpp"
#include "linked/llm/prompts.hpp"

namespace linked::reward {
namespace {

// Portable replacement for std::uniform_int_distribution, whose output is
// implementation-defined.
std::uint64_t below(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x = rng();
  while (x >= limit) x = rng();
  return x % bound;
}

bool by_qid_kid(const TrainTriple& a, const TrainTriple& b) {
  return std::tie(a.qid, a.kid) < std::tie(b.qid, b.kid);
}

}  // namespace

void to_json(Json& j, const TrainTriple& t) {
  j = Json::object();
  j["qid"] = t.qid;
  j["kid"] = t.kid;
  j["question"] = t.question_text;
  j["knowledge"] = t.knowledge_text;
  j["label"] = t.y;
}

void from_json(const Json& j, TrainTriple& t) {
  t.qid = j.at("qid").get<std::string>();
  t.kid = j.value("kid", std::string());
  t.question_text = j.at("question").get<std::string>();
  t.knowledge_text = j.at("knowledge").get<std::string>();
  t.y = j.at("label").get<int>();
  if (t.y != 0 && t.y != 1) throw DataError("training label must be 0 or 1");
  if (t.question_text.empty()) throw DataError("training question text is empty");
}

TrainingSplit prepare_training_set(std::span<const KnowledgeRecord> pool,
                                   std::span<const Question> questions, SplitFractions split,
                                   std::uint64_t seed) {
  if (!(split.train > 0.0) || !(split.val > 0.0) || split.train + split.val > 1.0 + 1e-12)
    throw DataError("split fractions must be positive and sum to at most 1");

  const std::vector<Question> owned(questions.begin(), questions.end());
  const QuestionIndex index(owned);

  std::map<std::string, std::vector<TrainTriple>> by_question;
  for (const auto& r : pool) {
    if (!r.level || !r.label) throw DataError("knowledge " + r.qid + "/" + r.kid + " is not labeled");
    const Question& q = index.at(r.qid);
    TrainTriple t;
    t.qid = r.qid;
    t.kid = r.kid;
    t.question_text = llm::render_question_text(q);
    t.knowledge_text = r.text;
    t.y = label_for(*r.level) == Label::positive ? 1 : 0;
    by_question[r.qid].push_back(std::move(t));
  }

  std::vector<std::string> mixed;
  for (const auto& [qid, triples] : by_question) {
    const auto positives = std::count_if(triples.begin(), triples.end(), [](const auto& t) { return t.y == 1; });
    if (positives > 0 && positives < static_cast<std::ptrdiff_t>(triples.size())) mixed.push_back(qid);
  }
  if (mixed.empty()) throw DataError("no question has both positive and negative knowledge");

  std::mt19937_64 rng(seed);
  for (std::size_t i = mixed.size(); i > 1; --i) std::swap(mixed[i - 1], mixed[below(rng, i)]);

  const auto total = static_cast<double>(mixed.size());
  const std::size_t n_val = static_cast<std::size_t>(std::max(1.0, std::round(split.val * total)));
  const std::size_t n_train =
      std::min(mixed.size() - std::min(n_val, mixed.size()),
               static_cast<std::size_t>(std::round(split.train * total)));
  if (n_val >= mixed.size() || n_train == 0)
    throw DataError("split leaves train or validation empty (" + std::to_string(mixed.size()) +
                    " usable questions)");

  TrainingSplit out;
  for (std::size_t i = 0; i < n_val + n_train; ++i) {
    auto& dest = i < n_val ? out.val : out.train;
    auto& src = by_question[mixed[i]];
    dest.insert(dest.end(), src.begin(), src.end());
  }
  std::sort(out.train.begin(), out.train.end(), by_qid_kid);
  std::sort(out.val.begin(), out.val.end(), by_qid_kid);
  return out;
}

void export_training_set(std::span<const TrainTriple> triples, const std::filesystem::path& path) {
  if (triples.empty()) throw DataError("nothing to export: training set is empty");
  std::vector<TrainTriple> ordered(triples.begin(), triples.end());
  std::stable_sort(ordered.begin(), ordered.end(), by_qid_kid);
  persist_stage(ordered, path);
}

std::vector<TrainTriple> load_training_set(const std::filesystem::path& path) {
  return load_stage<TrainTriple>(path);
}

}  // namespace linked::reward
