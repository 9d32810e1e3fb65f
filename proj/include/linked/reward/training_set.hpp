#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "linked/core/serialization.hpp"
#include "linked/core/types.hpp"

namespace linked::reward {

// One <question, knowledge, label> example for the scorer. y = 1 marks
// knowledge that kept or made the model correct.
struct TrainTriple {
  std::string qid;
  std::string kid;
  std::string question_text;  // stem + rendered options
  std::string knowledge_text;
  int y = 0;

  bool operator==(const TrainTriple&) const = default;
};

// Export schema: {"qid", "kid", "question", "knowledge", "label"}.
void to_json(Json& j, const TrainTriple& t);
void from_json(const Json& j, TrainTriple& t);

struct SplitFractions {
  double train = 0.9;
  double val = 0.1;
};

struct TrainingSplit {
  std::vector<TrainTriple> train;
  std::vector<TrainTriple> val;
};

// Drops every question whose knowledge is all-positive or all-negative, then
// splits the remaining questions (never individual triples) between train
// and val with a seeded shuffle. Both splits are ordered by (qid, kid).
// Throws DataError when nothing survives the filter or a split would be
// empty.
TrainingSplit prepare_training_set(std::span<const KnowledgeRecord> pool,
                                   std::span<const Question> questions, SplitFractions split,
                                   std::uint64_t seed);

// Atomic overwrite, ordered by (qid, kid). Throws DataError on an empty list.
void export_training_set(std::span<const TrainTriple> triples, const std::filesystem::path& path);

std::vector<TrainTriple> load_training_set(const std::filesystem::path& path);

}  // namespace linked::reward
