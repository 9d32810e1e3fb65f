#pragma once

#include <json.hpp>

#include "linked/core/types.hpp"

namespace linked {

using Json = nlohmann::ordered_json;

// Stage-file schema: field names match the struct members, unset optionals
// are written as null.
void to_json(Json& j, const KnowledgeRecord& r);
void from_json(const Json& j, KnowledgeRecord& r);

void to_json(Json& j, const AnswerSample& s);
void from_json(const Json& j, AnswerSample& s);

// Dataset schema: {"id", "question", "options", "answer"}.
void to_json(Json& j, const Question& q);
void from_json(const Json& j, Question& q);

void to_json(Json& j, const RunConfig& c);
// Only keys present in `j` override the current values of `c`.
void merge_from_json(const Json& j, RunConfig& c);

}  // namespace linked
