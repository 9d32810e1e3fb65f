#include "linked/llm/chat.hpp"

#include <cctype>

#include "linked/core/errors.hpp"

namespace linked::llm {

std::string_view to_string(Role role) {
  switch (role) {
    case Role::system: return "system";
    case Role::user: return "user";
    case Role::assistant: return "assistant";
  }
  return "user";
}

std::string_view to_string(PromptTag tag) {
  switch (tag) {
    case PromptTag::knowledge_gen: return "knowledge_gen";
    case PromptTag::direct_answer: return "direct_answer";
    case PromptTag::knowledge_answer: return "knowledge_answer";
  }
  return "?";
}

PromptTag prompt_tag_from_string(std::string_view text) {
  if (text == "knowledge_gen") return PromptTag::knowledge_gen;
  if (text == "direct_answer") return PromptTag::direct_answer;
  if (text == "knowledge_answer") return PromptTag::knowledge_answer;
  throw DataError("unknown prompt tag: " + std::string(text));
}

int default_max_tokens(PromptTag tag) { return tag == PromptTag::knowledge_gen ? 256 : 64; }

void ChatRequest::validate() const {
  if (messages.empty()) throw GatewayError("chat request has no messages");
  if (messages.front().role == Role::assistant)
    throw GatewayError("chat request must start with a system or user message");
  if (n_samples < 1) throw GatewayError("chat request needs n_samples >= 1");
  if (!(temperature >= 0.0)) throw GatewayError("chat request temperature must be >= 0");
  if (max_tokens < 1) throw GatewayError("chat request max_tokens must be >= 1");
  if (first_sample < 0) throw GatewayError("chat request first_sample must be >= 0");
}

std::int64_t count_words(std::string_view text) {
  std::int64_t words = 0;
  bool in_word = false;
  for (char c : text) {
    const bool space = std::isspace(static_cast<unsigned char>(c)) != 0;
    if (!space && !in_word) ++words;
    in_word = !space;
  }
  return words;
}

}  // namespace linked::llm
