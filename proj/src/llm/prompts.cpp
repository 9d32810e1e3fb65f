#include "linked/llm/prompts.hpp"

#include <array>
#include <stdexcept>

namespace linked::llm {
namespace {

struct Exemplar {
  std::string_view stem;
  std::array<std::string_view, 2> options;
  int answer;  // 1-based
  std::string_view knowledge;
};

constexpr std::array<Exemplar, 3> kExemplars{{
    {"The ice cream melted faster than the popsicle because the _ was left in the sun.",
     {"ice cream", "popsicle"},
     1,
     "Food left in direct sunlight warms up and melts sooner than food kept in the shade."},
    {"Tom lent his umbrella to Mark, so _ stayed dry on the walk home in the rain.",
     {"Tom", "Mark"},
     2,
     "Whoever holds an umbrella during rain is the one who stays dry."},
    {"The bookshelf collapsed under the weight of the books since the _ was flimsy.",
     {"bookshelf", "books"},
     1,
     "A weak support structure gives way when it carries more load than it can bear."},
}};

constexpr std::string_view kAnswerSystem =
    "You answer commonsense multiple-choice questions. Read the question and the numbered "
    "options, then reply with \"Answer: (n)\" where n is the number of the best option.";

constexpr std::string_view kKnowledgeAnswerSystem =
    "You answer commonsense multiple-choice questions. Use the given knowledge when it helps. "
    "Reply with \"Answer: (n)\" where n is the number of the best option.";

constexpr std::string_view kKnowledgeGenSystem =
    "Write one self-contained commonsense statement that would help someone reason about the "
    "question. State general knowledge only; do not say which option is correct.";

std::string exemplar_question(const Exemplar& e) {
  return std::string("Question: ") + std::string(e.stem) + "\nOptions: (1) " +
         std::string(e.options[0]) + " (2) " + std::string(e.options[1]);
}

std::string target_question(const Question& q) {
  return "Question: " + q.stem + "\nOptions: " + render_options(q);
}

}  // namespace

std::string render_options(const Question& q) {
  std::string out;
  for (std::size_t i = 0; i < q.options.size(); ++i) {
    if (i) out += ' ';
    out += '(' + std::to_string(i + 1) + ") " + q.options[i];
  }
  return out;
}

std::string render_question_text(const Question& q) { return q.stem + "\n" + render_options(q); }

std::vector<Message> render_prompt(const Question& q, PromptTag tag,
                                   std::optional<std::string_view> knowledge) {
  std::vector<Message> messages;
  switch (tag) {
    case PromptTag::direct_answer:
      messages.push_back({Role::system, std::string(kAnswerSystem)});
      for (const auto& e : kExemplars) {
        messages.push_back({Role::user, exemplar_question(e)});
        messages.push_back({Role::assistant, "Answer: (" + std::to_string(e.answer) + ")"});
      }
      messages.push_back({Role::user, target_question(q)});
      break;
    case PromptTag::knowledge_answer:
      if (!knowledge) throw std::invalid_argument("knowledge_answer prompt requires knowledge");
      messages.push_back({Role::system, std::string(kKnowledgeAnswerSystem)});
      for (const auto& e : kExemplars) {
        messages.push_back(
            {Role::user, "Knowledge: " + std::string(e.knowledge) + "\n" + exemplar_question(e)});
        messages.push_back({Role::assistant, "Answer: (" + std::to_string(e.answer) + ")"});
      }
      messages.push_back({Role::user, "Knowledge: " + std::string(*knowledge) + "\n" + target_question(q)});
      break;
    case PromptTag::knowledge_gen:
      messages.push_back({Role::system, std::string(kKnowledgeGenSystem)});
      for (const auto& e : kExemplars) {
        messages.push_back({Role::user, exemplar_question(e) + "\nKnowledge:"});
        messages.push_back({Role::assistant, std::string(e.knowledge)});
      }
      messages.push_back({Role::user, target_question(q) + "\nKnowledge:"});
      break;
  }
  return messages;
}

ChatRequest make_request(const Question& q, PromptTag tag, std::optional<std::string_view> knowledge,
                         double temperature, int n_samples, std::string stage, int first_sample) {
  ChatRequest req;
  req.messages = render_prompt(q, tag, knowledge);
  req.temperature = temperature;
  req.n_samples = n_samples;
  req.max_tokens = default_max_tokens(tag);
  req.tag = tag;
  req.qid = q.id;
  req.stage = std::move(stage);
  req.first_sample = first_sample;
  return req;
}

}  // namespace linked::llm
