#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "linked/core/types.hpp"
#include "linked/llm/chat.hpp"

namespace linked::llm {

// "(1) first (2) second ..." with 1-based numbering.
std::string render_options(const Question& q);

// Stem followed by the rendered options on the next line.
std::string render_question_text(const Question& q);

// Few-shot chat prompt for one question. Answer families carry three worked
// exemplars and end with the target question; knowledge_gen asks for one
// self-contained commonsense statement and never reveals the answer.
// Throws std::invalid_argument when knowledge_answer is requested without
// knowledge.
std::vector<Message> render_prompt(const Question& q, PromptTag tag,
                                   std::optional<std::string_view> knowledge = std::nullopt);

// Convenience: prompt + sampling parameters + routing metadata.
ChatRequest make_request(const Question& q, PromptTag tag, std::optional<std::string_view> knowledge,
                         double temperature, int n_samples, std::string stage, int first_sample = 0);

}  // namespace linked::llm
