#include "linked/core/dataset.hpp"

#include <unordered_set>

#include "linked/core/errors.hpp"
#include "linked/core/stage_io.hpp"

namespace linked {

void validate_question(const Question& q) {
  if (q.id.empty()) throw DataError("question id is empty");
  if (q.options.size() < 2)
    throw DataError("question " + q.id + ": needs at least 2 options");
  if (q.gold < 0 || q.gold >= static_cast<int>(q.options.size()))
    throw DataError("question " + q.id + ": answer index " + std::to_string(q.gold) +
                    " out of range for " + std::to_string(q.options.size()) + " options");
  std::unordered_set<std::string> seen;
  for (const auto& option : q.options) {
    if (!seen.insert(option).second)
      throw DataError("question " + q.id + ": duplicate option \"" + option + "\"");
  }
}

std::vector<Question> load_dataset(const std::filesystem::path& path, DatasetFormat format,
                                   const std::string& dataset_tag) {
  if (format != DatasetFormat::jsonl) throw DataError("unsupported dataset format");
  std::vector<Question> out;
  std::unordered_set<std::string> ids;
  for_each_jsonl_line(path, [&](std::size_t number, const std::string& line) {
    Question q;
    try {
      q = Json::parse(line).get<Question>();
      validate_question(q);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(number, e.what());
    } catch (const DataError& e) {
      throw ParseError(number, e.what());
    }
    if (!ids.insert(q.id).second) throw ParseError(number, "duplicate question id \"" + q.id + "\"");
    if (q.dataset_tag.empty()) q.dataset_tag = dataset_tag;
    out.push_back(std::move(q));
  });
  return out;
}

void save_dataset(const std::vector<Question>& questions, const std::filesystem::path& path) {
  persist_stage(questions, path);
}

QuestionIndex::QuestionIndex(const std::vector<Question>& questions) {
  by_id_.reserve(questions.size());
  for (const auto& q : questions) {
    if (!by_id_.emplace(q.id, &q).second) throw DataError("duplicate question id \"" + q.id + "\"");
  }
}

const Question& QuestionIndex::at(const std::string& id) const {
  auto* q = find(id);
  if (!q) throw DataError("unknown question id \"" + id + "\"");
  return *q;
}

const Question* QuestionIndex::find(const std::string& id) const {
  auto it = by_id_.find(id);
  return it == by_id_.end() ? nullptr : it->second;
}

}  // namespace linked
