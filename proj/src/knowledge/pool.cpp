#include "linked/knowledge/pool.hpp"

#include <algorithm>
#include <cctype>
#include <regex>
#include <unordered_map>

#include "linked/core/errors.hpp"
#include "linked/llm/prompts.hpp"
#include "linked/util/log.hpp"
#include "linked/util/parallel.hpp"

namespace linked::knowledge {
namespace {

std::optional<int> answer_number(std::string_view raw) {
  static const std::regex kAnswer(R"(answer(?:\s+is)?\s*[:\-]?\s*(?:\(\s*(\d{1,6})\s*\)|(\d{1,6})(?!\d)))",
                                  std::regex::icase);
  static const std::regex kLeading(R"(^\s*\(?\s*(\d{1,6})\s*\)?(?=[\s.:,)]|$))");

  const std::string text(raw);
  std::optional<int> found;
  for (std::sregex_iterator it(text.begin(), text.end(), kAnswer), end; it != end; ++it) {
    const auto& m = *it;
    found = std::stoi(m[1].matched ? m[1].str() : m[2].str());
  }
  if (found) return found;
  std::smatch lead;
  if (std::regex_search(text, lead, kLeading)) return std::stoi(lead[1].str());
  return std::nullopt;
}

std::string_view final_line(std::string_view raw) {
  std::size_t end = raw.size();
  while (end > 0) {
    const std::size_t start = raw.rfind('\n', end - 1);
    const std::size_t begin = start == std::string_view::npos ? 0 : start + 1;
    std::string_view line = raw.substr(begin, end - begin);
    if (std::any_of(line.begin(), line.end(), [](char c) { return !std::isspace(static_cast<unsigned char>(c)); }))
      return line;
    if (start == std::string_view::npos) break;
    end = start;
  }
  return {};
}

std::string trimmed(std::string_view s) {
  auto not_space = [](char c) { return !std::isspace(static_cast<unsigned char>(c)); };
  auto b = std::find_if(s.begin(), s.end(), not_space);
  auto e = std::find_if(s.rbegin(), s.rend(), not_space).base();
  return b < e ? std::string(b, e) : std::string();
}

std::string make_kid(int index, int count) {
  const int width = std::max<int>(2, static_cast<int>(std::to_string(std::max(count - 1, 0)).size()));
  std::string digits = std::to_string(index);
  return "k" + std::string(static_cast<std::size_t>(std::max<int>(0, width - static_cast<int>(digits.size()))), '0') + digits;
}

bool is_correct(const AnswerSample& s, int gold) { return s.valid && s.parsed && *s.parsed == gold; }

}  // namespace

std::optional<int> parse_answer(std::string_view raw, int n_options) {
  auto number = answer_number(raw);
  if (number && *number >= 1 && *number <= n_options) return *number - 1;
  return std::nullopt;
}

std::optional<int> parse_answer(std::string_view raw, std::span<const std::string> options) {
  if (auto idx = parse_answer(raw, static_cast<int>(options.size()))) return idx;
  const std::string_view line = final_line(raw);
  std::optional<int> hit;
  int hits = 0;
  for (std::size_t i = 0; i < options.size(); ++i) {
    if (!options[i].empty() && line.find(options[i]) != std::string_view::npos) {
      hit = static_cast<int>(i);
      ++hits;
    }
  }
  return hits == 1 ? hit : std::nullopt;
}

Level assign_level(const AnswerSample& direct, const AnswerSample& with_k, int gold) {
  if (direct.qid != with_k.qid)
    throw DataError("assign_level: samples belong to different questions (" + direct.qid + ", " +
                    with_k.qid + ")");
  if (direct.condition != Condition::direct || with_k.condition != Condition::with_knowledge)
    throw DataError("assign_level: expected a direct and a knowledge-conditioned sample");
  const bool before = is_correct(direct, gold);
  const bool after = is_correct(with_k, gold);
  if (!before && after) return Level::useful;
  if (before && after) return Level::harmless;
  if (!before && !after) return Level::useless;
  return Level::harmful;
}

std::vector<KnowledgeRecord> elicit_knowledge(const Question& q, const RunConfig& cfg,
                                              llm::Gateway& gateway) {
  const int n = cfg.knowledge_samples;
  auto req = llm::make_request(q, llm::PromptTag::knowledge_gen, std::nullopt, cfg.knowledge_temperature,
                               n, std::string(stage::elicit));
  const auto resp = gateway.complete(req);

  std::vector<KnowledgeRecord> out;
  for (int i = 0; i < n; ++i) {
    std::string text = trimmed(resp.completions[static_cast<std::size_t>(i)]);
    if (text.empty()) {
      auto retry = req;
      retry.n_samples = 1;
      retry.first_sample = n + i;
      text = trimmed(gateway.complete(retry).completions.front());
    }
    if (text.empty()) {
      util::log_event("elicit", "dropped_blank", Json{{"qid", q.id}, {"sample_index", i}});
      continue;
    }
    KnowledgeRecord r;
    r.qid = q.id;
    r.kid = make_kid(i, n);
    r.text = std::move(text);
    r.sample_index = i;
    r.gen_temperature = cfg.knowledge_temperature;
    out.push_back(std::move(r));
  }
  if (out.empty()) throw ElicitationError("question " + q.id + ": no usable knowledge after retry");
  return out;
}

std::vector<AnswerSample> sample_answers(const Question& q, const Rationale* rationale, int n,
                                         int first_sample, double temperature,
                                         std::string_view stage, llm::Gateway& gateway) {
  const auto tag = rationale ? llm::PromptTag::knowledge_answer : llm::PromptTag::direct_answer;
  std::optional<std::string_view> text;
  if (rationale) text = rationale->text;
  const auto resp =
      gateway.complete(llm::make_request(q, tag, text, temperature, n, std::string(stage), first_sample));

  std::vector<AnswerSample> out;
  out.reserve(resp.detail.size());
  for (const auto& c : resp.detail) {
    AnswerSample s;
    s.qid = q.id;
    s.condition = rationale ? Condition::with_knowledge : Condition::direct;
    if (rationale) s.rationale_ids = rationale->ids;
    s.raw_text = c.text;
    s.parsed = parse_answer(c.text, std::span<const std::string>(q.options));
    s.valid = s.parsed.has_value();
    s.tokens_in = c.tokens_in;
    s.tokens_out = c.tokens_out;
    out.push_back(std::move(s));
  }
  return out;
}

AnswerSample answer(const Question& q, const Rationale* rationale, const RunConfig& cfg,
                    llm::Gateway& gateway, std::string_view stage) {
  return sample_answers(q, rationale, 1, 0, cfg.answer_temperature, stage, gateway).front();
}

LabeledQuestion label_question(const Question& q, std::vector<KnowledgeRecord> records,
                               const RunConfig& cfg, llm::Gateway& gateway) {
  LabeledQuestion out;
  const AnswerSample direct = answer(q, nullptr, cfg, gateway, stage::label);
  out.samples.push_back(direct);
  for (auto& r : records) {
    if (r.qid != q.id) throw DataError("knowledge " + r.kid + " belongs to " + r.qid + ", not " + q.id);
    const Rationale rationale{r.text, {r.kid}};
    AnswerSample with_k = answer(q, &rationale, cfg, gateway, stage::label);
    r.level = assign_level(direct, with_k, q.gold);
    r.label = label_for(*r.level);
    out.samples.push_back(std::move(with_k));
  }
  out.records = std::move(records);
  return out;
}

ElicitResult elicit_all(std::span<const Question> questions, const RunConfig& cfg,
                        llm::Gateway& gateway) {
  cfg.validate();
  std::vector<std::vector<KnowledgeRecord>> per_question(questions.size());
  std::vector<std::optional<std::string>> errors(questions.size());
  util::parallel_for(questions.size(), static_cast<std::size_t>(cfg.concurrency_limit), [&](std::size_t i) {
    try {
      per_question[i] = elicit_knowledge(questions[i], cfg, gateway);
    } catch (const ElicitationError& e) {
      errors[i] = e.what();
    }
  });
  ElicitResult out;
  for (std::size_t i = 0; i < questions.size(); ++i) {
    if (errors[i]) {
      out.failures.push_back({questions[i].id, *errors[i]});
      util::log_event("elicit", "question_failed", Json{{"qid", questions[i].id}, {"reason", *errors[i]}});
      continue;
    }
    for (auto& r : per_question[i]) out.records.push_back(std::move(r));
  }
  return out;
}

PoolBuild label_pool(std::span<const Question> questions, std::span<const KnowledgeRecord> pool,
                     const RunConfig& cfg, llm::Gateway& gateway) {
  cfg.validate();
  std::unordered_map<std::string, std::size_t> position;
  for (std::size_t i = 0; i < questions.size(); ++i) position.emplace(questions[i].id, i);
  std::vector<std::vector<KnowledgeRecord>> grouped(questions.size());
  for (const auto& r : pool) {
    auto it = position.find(r.qid);
    if (it == position.end()) throw DataError("pool record " + r.kid + " refers to unknown question " + r.qid);
    grouped[it->second].push_back(r);
  }

  std::vector<LabeledQuestion> labeled(questions.size());
  util::parallel_for(questions.size(), static_cast<std::size_t>(cfg.concurrency_limit), [&](std::size_t i) {
    if (!grouped[i].empty()) labeled[i] = label_question(questions[i], std::move(grouped[i]), cfg, gateway);
  });

  PoolBuild out;
  for (auto& lq : labeled) {
    for (auto& r : lq.records) out.records.push_back(std::move(r));
    for (auto& s : lq.samples) out.samples.push_back(std::move(s));
  }
  return out;
}

PoolBuild build_pool(std::span<const Question> questions, const RunConfig& cfg,
                     llm::Gateway& gateway) {
  cfg.validate();
  if (questions.empty()) throw DataError("build_pool: no questions");
  std::vector<LabeledQuestion> labeled(questions.size());
  std::vector<std::optional<std::string>> errors(questions.size());
  util::parallel_for(questions.size(), static_cast<std::size_t>(cfg.concurrency_limit), [&](std::size_t i) {
    try {
      labeled[i] = label_question(questions[i], elicit_knowledge(questions[i], cfg, gateway), cfg, gateway);
    } catch (const ElicitationError& e) {
      errors[i] = e.what();
    }
  });

  PoolBuild out;
  for (std::size_t i = 0; i < questions.size(); ++i) {
    if (errors[i]) {
      out.failures.push_back({questions[i].id, *errors[i]});
      util::log_event("pool", "question_failed", Json{{"qid", questions[i].id}, {"reason", *errors[i]}});
      continue;
    }
    for (auto& r : labeled[i].records) out.records.push_back(std::move(r));
    for (auto& s : labeled[i].samples) out.samples.push_back(std::move(s));
  }
  return out;
}

}  // namespace linked::knowledge
