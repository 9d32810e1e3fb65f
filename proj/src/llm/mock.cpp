#include "linked/llm/mock.hpp"

#include <array>
#include <regex>

#include "linked/core/errors.hpp"
#include "linked/util/hash.hpp"

namespace linked::llm {
namespace {

constexpr std::array<std::string_view, 4> kNoteBodies{
    "people usually settle situations like this one by what they have seen happen before.",
    "the physical properties of the objects involved decide which outcome is plausible.",
    "the intentions of the people involved explain what they would most likely do next.",
    "everyday cause and effect points to the option that fits the rest of the sentence.",
};

const std::string& target_text(const ChatRequest& req) {
  for (auto it = req.messages.rbegin(); it != req.messages.rend(); ++it) {
    if (it->role == Role::user) return it->content;
  }
  return req.messages.back().content;
}

util::KeyBuilder base_key(std::string_view kind, const ChatRequest& req, const MockWorldSpec& world,
                          int sample_index) {
  util::KeyBuilder key;
  key.add(kind)
      .add(world.seed)
      .add(std::string_view(req.qid))
      .add(to_string(req.tag))
      .add(std::string_view(req.stage))
      .add(sample_index)
      .add(std::string_view(target_text(req)));
  return key;
}

std::int64_t prompt_words(const ChatRequest& req) {
  std::int64_t total = 0;
  for (const auto& m : req.messages) total += count_words(m.content);
  return total;
}

std::string knowledge_completion(const ChatRequest& req, const MockWorldSpec& world,
                                 int sample_index) {
  const auto key = base_key("knowledge", req, world, sample_index);
  if (world.empty_rate > 0.0 &&
      util::unit_draw(util::KeyBuilder(key).add("empty").str()) < world.empty_rate) {
    return "  ";
  }
  const std::string reference = util::sha256_hex(key.str()).substr(0, 12);
  const auto body = kNoteBodies[util::bounded_draw(util::KeyBuilder(key).add("body").str(),
                                                   kNoteBodies.size())];
  return "Background note [ref " + reference + "]: " + std::string(body);
}

std::string answer_completion(const ChatRequest& req, const MockWorldSpec& world, const Question& q,
                              int sample_index) {
  double p_correct = world.p0;
  if (req.tag == PromptTag::knowledge_answer) {
    const auto refs = mock_references(req);
    if (!refs.empty()) {
      double sum = 0.0;
      for (const auto& ref : refs)
        sum += mock_reference_positive(world, q.id, ref) ? world.p_pos : world.p_neg;
      p_correct = sum / static_cast<double>(refs.size());
    }
  }
  const auto key = base_key("answer", req, world, sample_index);
  int choice = q.gold;
  if (!(util::unit_draw(key.str()) < p_correct)) {
    const auto n_wrong = static_cast<std::uint64_t>(q.options.size() - 1);
    choice = static_cast<int>(util::bounded_draw(util::KeyBuilder(key).add("wrong").str(), n_wrong));
    if (choice >= q.gold) ++choice;
  }
  return "Answer: (" + std::to_string(choice + 1) + ")";
}

}  // namespace

void MockWorldSpec::validate() const {
  auto check = [](double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(std::string("mock world: ") + name + " must be in [0,1]");
  };
  check(p0, "p0");
  check(p_pos, "p_pos");
  check(p_neg, "p_neg");
  check(positive_rate, "positive_rate");
  check(empty_rate, "empty_rate");
}

std::string MockWorldSpec::fingerprint() const {
  util::KeyBuilder key;
  key.add(p0).add(p_pos).add(p_neg).add(positive_rate).add(seed).add(empty_rate);
  return util::sha256_hex(key.str()).substr(0, 16);
}

void to_json(Json& j, const MockWorldSpec& w) {
  j = Json::object();
  j["p0"] = w.p0;
  j["p_pos"] = w.p_pos;
  j["p_neg"] = w.p_neg;
  j["positive_rate"] = w.positive_rate;
  j["seed"] = w.seed;
  j["empty_rate"] = w.empty_rate;
}

void from_json(const Json& j, MockWorldSpec& w) {
  w.p0 = j.value("p0", w.p0);
  w.p_pos = j.value("p_pos", w.p_pos);
  w.p_neg = j.value("p_neg", w.p_neg);
  w.positive_rate = j.value("positive_rate", w.positive_rate);
  w.seed = j.value("seed", w.seed);
  w.empty_rate = j.value("empty_rate", w.empty_rate);
}

bool mock_reference_positive(const MockWorldSpec& world, const std::string& qid,
                             const std::string& reference) {
  util::KeyBuilder key;
  key.add("polarity").add(world.seed).add(std::string_view(qid)).add(std::string_view(reference));
  return util::unit_draw(key.str()) < world.positive_rate;
}

std::vector<std::string> mock_references(const ChatRequest& req) {
  static const std::regex kRef(R"(\[ref ([0-9a-f]{12})\])");
  std::vector<std::string> out;
  const std::string& text = target_text(req);
  for (std::sregex_iterator it(text.begin(), text.end(), kRef), end; it != end; ++it)
    out.push_back((*it)[1].str());
  return out;
}

Completion mock_sample(const ChatRequest& req, const MockWorldSpec& world, const Question& q,
                       int sample_index) {
  Completion c;
  c.text = req.tag == PromptTag::knowledge_gen ? knowledge_completion(req, world, sample_index)
                                               : answer_completion(req, world, q, sample_index);
  c.tokens_in = prompt_words(req);
  c.tokens_out = count_words(c.text);
  return c;
}

ChatResponse mock_complete(const ChatRequest& req, const MockWorldSpec& world, const Question& q) {
  ChatResponse resp;
  for (int i = 0; i < req.n_samples; ++i) {
    Completion c = mock_sample(req, world, q, req.first_sample + i);
    resp.tokens_in += c.tokens_in;
    resp.tokens_out += c.tokens_out;
    resp.completions.push_back(c.text);
    resp.detail.push_back(std::move(c));
  }
  return resp;
}

MockBackend::MockBackend(MockWorldSpec world, std::vector<Question> questions)
    : world_(world), questions_(std::move(questions)), index_(questions_) {
  world_.validate();
}

std::string MockBackend::model_id() const { return "mock-" + world_.fingerprint(); }

std::vector<Completion> MockBackend::generate(const ChatRequest& req,
                                              std::span<const int> sample_indices) {
  const Question* q = index_.find(req.qid);
  if (!q) throw GatewayError("mock backend: unknown question id \"" + req.qid + "\"");
  std::vector<Completion> out;
  out.reserve(sample_indices.size());
  for (int index : sample_indices) out.push_back(mock_sample(req, world_, *q, index));
  return out;
}

std::vector<Question> synthetic_dataset(std::size_t count, std::uint64_t seed, int n_options) {
  if (n_options < 2) throw DataError("synthetic dataset needs at least 2 options");
  static constexpr std::array<std::string_view, 6> kSubjects{"Alex", "Jordan", "Riley", "Sam", "Casey", "Morgan"};
  std::vector<Question> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "q%04zu", i);
    Question q;
    q.id = id;
    q.stem = "Synthetic item " + std::to_string(i) + ": which choice best completes the situation?";
    for (int o = 0; o < n_options; ++o)
      q.options.push_back(std::string(kSubjects[static_cast<std::size_t>(o) % kSubjects.size()]) +
                          " (choice " + std::to_string(o + 1) + ")");
    util::KeyBuilder key;
    key.add("gold").add(seed).add(std::string_view(q.id));
    q.gold = static_cast<int>(util::bounded_draw(key.str(), static_cast<std::uint64_t>(n_options)));
    q.dataset_tag = "synthetic";
    out.push_back(std::move(q));
  }
  return out;
}

}  // namespace linked::llm
