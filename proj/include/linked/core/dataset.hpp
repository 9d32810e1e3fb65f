#pragma once

#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "linked/core/types.hpp"

namespace linked {

enum class DatasetFormat { jsonl };

// Loads questions in file order. Throws ParseError (with the 1-based line)
// on malformed records, out-of-range gold indices, duplicate option texts
// or duplicate ids. Questions without a "dataset" key get `dataset_tag`.
std::vector<Question> load_dataset(const std::filesystem::path& path,
                                   DatasetFormat format = DatasetFormat::jsonl,
                                   const std::string& dataset_tag = {});

void save_dataset(const std::vector<Question>& questions, const std::filesystem::path& path);

// Throws DataError if `q` violates the Question invariants.
void validate_question(const Question& q);

// Non-owning id -> question lookup. The vector must outlive the index.
class QuestionIndex {
 public:
  explicit QuestionIndex(const std::vector<Question>& questions);

  const Question& at(const std::string& id) const;
  const Question* find(const std::string& id) const;
  std::size_t size() const { return by_id_.size(); }

 private:
  std::unordered_map<std::string, const Question*> by_id_;
};

}  // namespace linked
