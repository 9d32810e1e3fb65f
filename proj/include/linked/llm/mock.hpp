#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "linked/core/dataset.hpp"
#include "linked/core/serialization.hpp"
#include "linked/core/types.hpp"
#include "linked/llm/chat.hpp"

namespace linked::llm {

// A synthetic model whose answer accuracy is set per condition. Knowledge it
// generates carries a planted polarity (positive with `positive_rate`) that
// is recoverable only from the world seed, so downstream stages must discover
// knowledge quality the same way they would against a real model.
struct MockWorldSpec {
  double p0 = 0.5;             // P(correct) for a direct answer
  double p_pos = 0.9;          // P(correct) given positive knowledge
  double p_neg = 0.2;          // P(correct) given negative knowledge
  double positive_rate = 0.5;  // P(generated knowledge is positive)
  std::uint64_t seed = 0;
  double empty_rate = 0.0;  // P(knowledge completion comes back blank)

  void validate() const;
  std::string fingerprint() const;

  bool operator==(const MockWorldSpec&) const = default;
};

void to_json(Json& j, const MockWorldSpec& w);
void from_json(const Json& j, MockWorldSpec& w);

// Every draw is a pure function of (world seed, qid, tag, stage, sample
// index, target prompt text), so repeated calls are byte-identical.
Completion mock_sample(const ChatRequest& req, const MockWorldSpec& world, const Question& q,
                       int sample_index);

ChatResponse mock_complete(const ChatRequest& req, const MockWorldSpec& world, const Question& q);

// Planted polarity of a knowledge reference token, as the mock sees it.
bool mock_reference_positive(const MockWorldSpec& world, const std::string& qid,
                             const std::string& reference);

// Reference tokens embedded in the target (last user) message of a prompt.
std::vector<std::string> mock_references(const ChatRequest& req);

class MockBackend final : public ChatBackend {
 public:
  MockBackend(MockWorldSpec world, std::vector<Question> questions);
  MockBackend(const MockBackend&) = delete;
  MockBackend& operator=(const MockBackend&) = delete;

  std::string model_id() const override;
  std::vector<Completion> generate(const ChatRequest& req,
                                   std::span<const int> sample_indices) override;

  const MockWorldSpec& world() const { return world_; }

 private:
  MockWorldSpec world_;
  std::vector<Question> questions_;
  QuestionIndex index_;
};

// Binary-choice questions with ids q0000, q0001, ... and a seeded gold side.
std::vector<Question> synthetic_dataset(std::size_t count, std::uint64_t seed,
                                        int n_options = 2);

}  // namespace linked::llm
