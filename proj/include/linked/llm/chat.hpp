#pragma once

#include <cstdint>
#include <exception>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace linked::llm {

enum class Role { system, user, assistant };

struct Message {
  Role role = Role::user;
  std::string content;

  bool operator==(const Message&) const = default;
};

// Selects the prompt family and the default token budget.
enum class PromptTag { knowledge_gen, direct_answer, knowledge_answer };

std::string_view to_string(Role role);
std::string_view to_string(PromptTag tag);
PromptTag prompt_tag_from_string(std::string_view text);

int default_max_tokens(PromptTag tag);

struct ChatRequest {
  std::vector<Message> messages;
  double temperature = 0.0;
  int n_samples = 1;
  int max_tokens = 64;
  PromptTag tag = PromptTag::direct_answer;

  // Routing metadata, never sent to a remote backend. `stage` separates the
  // draw streams of different pipeline stages that happen to issue the same
  // prompt; samples are numbered first_sample .. first_sample + n_samples - 1.
  std::string qid;
  std::string stage;
  int first_sample = 0;

  // Throws GatewayError when the request is malformed.
  void validate() const;
};

struct Completion {
  std::string text;
  std::int64_t tokens_in = 0;
  std::int64_t tokens_out = 0;
  bool cached = false;
};

struct ChatResponse {
  std::vector<std::string> completions;
  // Usage billed for this call; cache hits cost nothing.
  std::int64_t tokens_in = 0;
  std::int64_t tokens_out = 0;
  bool cached = false;
  // Per-completion detail, parallel to `completions`.
  std::vector<Completion> detail;
};

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;

  // Identifies the model for cache keys; must differ between backends that
  // could answer the same prompt differently.
  virtual std::string model_id() const = 0;

  // Whether one call may produce several samples. May flip to false once a
  // remote server rejects n > 1.
  virtual bool multi_sample() const { return true; }

  // Produces one completion per entry in `sample_indices`, in that order.
  virtual std::vector<Completion> generate(const ChatRequest& req,
                                           std::span<const int> sample_indices) = 0;
};

// Raised by a backend that just learned the server refuses n > 1.
class MultiSampleRejected : public std::exception {
 public:
  const char* what() const noexcept override { return "backend rejected n > 1"; }
};

// Whitespace-delimited word count; the mock backend's token estimate.
std::int64_t count_words(std::string_view text);

}  // namespace linked::llm
