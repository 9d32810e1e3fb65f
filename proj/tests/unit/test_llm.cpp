#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <set>

#include "linked/core/dataset.hpp"
#include "linked/core/errors.hpp"
#include "linked/llm/gateway.hpp"
#include "linked/llm/http_backend.hpp"
#include "linked/llm/mock.hpp"
#include "linked/llm/prompts.hpp"
#include "linked/util/hash.hpp"
#include "linked/util/log.hpp"
#include "linked/util/parallel.hpp"
#include "support.hpp"

using namespace linked;
using namespace linked::llm;

namespace {

struct QuietLogs {
  QuietLogs() { util::set_logging(false); }
} quiet_logs;

std::string ref_note(const std::string& ref) { return "Background note [ref " + ref + "]: something."; }

// First 12-hex reference with the wanted polarity in `world` for `qid`.
std::string find_ref(const MockWorldSpec& world, const std::string& qid, bool positive) {
  for (int i = 0;; ++i) {
    const std::string ref = util::sha256_hex("ref" + std::to_string(i)).substr(0, 12);
    if (mock_reference_positive(world, qid, ref) == positive) return ref;
  }
}

double correct_rate(const ChatRequest& req, const MockWorldSpec& world, const Question& q, int samples) {
  int correct = 0;
  for (int i = 0; i < samples; ++i)
    if (mock_sample(req, world, q, i).text == "Answer: (" + std::to_string(q.gold + 1) + ")") ++correct;
  return static_cast<double>(correct) / samples;
}

std::string chat_reply(const std::vector<std::string>& texts, int prompt_tokens = 10, int completion_tokens = 3) {
  Json choices = Json::array();
  for (std::size_t i = 0; i < texts.size(); ++i)
    choices.push_back(Json{{"index", i}, {"message", {{"role", "assistant"}, {"content", texts[i]}}}});
  return Json{{"choices", choices}, {"usage", {{"prompt_tokens", prompt_tokens}, {"completion_tokens", completion_tokens}}}}
      .dump();
}

HttpBackendOptions fast_options(const std::string& url, int retries = 2) {
  HttpBackendOptions o;
  o.endpoint = url + "/v1";
  o.model = "test-model";
  o.api_key = "secret";
  o.max_retries = retries;
  o.backoff = std::chrono::milliseconds(1);
  o.timeout = std::chrono::seconds(5);
  return o;
}

}  // namespace

TEST_CASE("prompt rendering") {
  const auto q = testing::make_question("q1", 1, 3);
  CHECK(render_options(q) == "(1) option 1 (2) option 2 (3) option 3");
  CHECK(render_question_text(q) == "Which one fits?\n(1) option 1 (2) option 2 (3) option 3");

  const auto direct = render_prompt(q, PromptTag::direct_answer);
  CHECK(direct.front().role == Role::system);
  CHECK(direct.size() == 8);  // system + 3 exemplar pairs + target
  CHECK(direct.back().role == Role::user);
  CHECK(direct.back().content == "Question: Which one fits?\nOptions: (1) option 1 (2) option 2 (3) option 3");

  const auto with_k = render_prompt(q, PromptTag::knowledge_answer, "Birds fly.");
  CHECK(with_k.back().content.rfind("Knowledge: Birds fly.\nQuestion: ", 0) == 0);
  CHECK_THROWS_AS(render_prompt(q, PromptTag::knowledge_answer), std::invalid_argument);

  const auto gen = render_prompt(q, PromptTag::knowledge_gen);
  const std::string& target = gen.back().content;
  CHECK(target.substr(target.size() - 11) == "\nKnowledge:");

  const auto req = make_request(q, PromptTag::knowledge_gen, std::nullopt, 1.3, 5, "elicit", 2);
  CHECK(req.n_samples == 5);
  CHECK(req.first_sample == 2);
  CHECK(req.max_tokens == default_max_tokens(PromptTag::knowledge_gen));
  CHECK(req.qid == "q1");
}

TEST_CASE("prompts never reveal the gold answer") {
  for (auto tag : {PromptTag::direct_answer, PromptTag::knowledge_answer, PromptTag::knowledge_gen}) {
    std::optional<std::string_view> k;
    if (tag == PromptTag::knowledge_answer) k = "Some fact.";
    std::vector<std::vector<Message>> renders;
    for (int gold = 0; gold < 3; ++gold) renders.push_back(render_prompt(testing::make_question("q", gold, 3), tag, k));
    CHECK(renders[0] == renders[1]);
    CHECK(renders[1] == renders[2]);
  }
}

TEST_CASE("chat request validation") {
  auto req = make_request(testing::make_question(), PromptTag::direct_answer, std::nullopt, 0.7, 1, "reason");
  CHECK_NOTHROW(req.validate());
  auto bad = req;
  bad.n_samples = 0;
  CHECK_THROWS_AS(bad.validate(), GatewayError);
  bad = req;
  bad.messages.clear();
  CHECK_THROWS_AS(bad.validate(), GatewayError);
  bad = req;
  bad.temperature = -1;
  CHECK_THROWS_AS(bad.validate(), GatewayError);
  CHECK(count_words("  Answer: (1)  ") == 2);
  CHECK(count_words("") == 0);
}

TEST_CASE("mock world: answer rates match the configured probabilities") {
  const auto q = testing::make_question("q7", 1, 2);
  MockWorldSpec world{.p0 = 0.5, .p_pos = 0.9, .p_neg = 0.2, .positive_rate = 0.5, .seed = 11};
  const std::string pos = find_ref(world, q.id, true);
  const std::string neg = find_ref(world, q.id, false);

  const auto pos_req = make_request(q, PromptTag::knowledge_answer, ref_note(pos), 0.7, 1, "reason");
  const auto neg_req = make_request(q, PromptTag::knowledge_answer, ref_note(neg), 0.7, 1, "reason");
  const auto direct_req = make_request(q, PromptTag::direct_answer, std::nullopt, 0.7, 1, "reason");
  CHECK(std::abs(correct_rate(pos_req, world, q, 10000) - 0.9) <= 0.01);
  CHECK(std::abs(correct_rate(neg_req, world, q, 10000) - 0.2) <= 0.01);
  CHECK(std::abs(correct_rate(direct_req, world, q, 10000) - 0.5) <= 0.015);

  // Two references, one of each polarity: the mean of the two probabilities.
  const auto both = make_request(q, PromptTag::knowledge_answer, ref_note(pos) + "\n" + ref_note(neg), 0.7, 1, "reason");
  CHECK(std::abs(correct_rate(both, world, q, 10000) - 0.55) <= 0.015);

  // Knowledge without a reference is answered at the direct rate.
  const auto plain = make_request(q, PromptTag::knowledge_answer, "No reference here.", 0.7, 1, "reason");
  CHECK(std::abs(correct_rate(plain, world, q, 10000) - 0.5) <= 0.015);
}

TEST_CASE("mock world: polarity rate and wrong answers stay in range") {
  MockWorldSpec world{.positive_rate = 0.3, .seed = 2};
  int positive = 0;
  for (int i = 0; i < 10000; ++i)
    positive += mock_reference_positive(world, "q", util::sha256_hex(std::to_string(i)).substr(0, 12));
  CHECK(std::abs(positive / 10000.0 - 0.3) <= 0.015);

  const auto q = testing::make_question("q", 2, 4);
  MockWorldSpec never{.p0 = 0.0};
  const auto req = make_request(q, PromptTag::direct_answer, std::nullopt, 0.7, 1, "reason");
  std::set<std::string> seen;
  for (int i = 0; i < 300; ++i) seen.insert(mock_sample(req, never, q, i).text);
  CHECK(seen == std::set<std::string>{"Answer: (1)", "Answer: (2)", "Answer: (4)"});
}

TEST_CASE("mock world: deterministic per key, independent across stages") {
  const auto q = testing::make_question("q3");
  MockWorldSpec world{.seed = 5};
  auto req = make_request(q, PromptTag::knowledge_gen, std::nullopt, 1.3, 1, "elicit");
  const auto a = mock_sample(req, world, q, 0);
  CHECK(a.text == mock_sample(req, world, q, 0).text);
  CHECK(a.text.rfind("Background note [ref ", 0) == 0);
  CHECK(mock_references(make_request(q, PromptTag::knowledge_answer, a.text, 0.7, 1, "label")).size() == 1);
  CHECK(a.text != mock_sample(req, world, q, 1).text);
  auto other_stage = req;
  other_stage.stage = "reason";
  CHECK(a.text != mock_sample(other_stage, world, q, 0).text);
  CHECK(a.tokens_out == count_words(a.text));
  CHECK(a.tokens_in > 0);

  MockWorldSpec blank{.empty_rate = 1.0};
  CHECK(mock_sample(req, blank, q, 0).text.find_first_not_of(' ') == std::string::npos);
}

TEST_CASE("mock backend and synthetic data") {
  const auto qs = synthetic_dataset(200, 4);
  CHECK(qs == synthetic_dataset(200, 4));
  CHECK(qs != synthetic_dataset(200, 5));
  int gold_zero = 0;
  for (const auto& q : qs) {
    CHECK_NOTHROW(validate_question(q));
    CHECK(q.options.size() == 2);
    gold_zero += q.gold == 0;
  }
  CHECK(gold_zero > 70);
  CHECK(gold_zero < 130);
  CHECK(synthetic_dataset(3, 1, 4).front().options.size() == 4);
  CHECK_THROWS_AS(synthetic_dataset(3, 1, 1), DataError);

  MockBackend backend(MockWorldSpec{}, qs);
  auto req = make_request(qs[0], PromptTag::direct_answer, std::nullopt, 0.7, 1, "reason");
  const std::vector<int> idx{0, 1, 2};
  CHECK(backend.generate(req, idx).size() == 3);
  req.qid = "nope";
  CHECK_THROWS_AS(backend.generate(req, idx), GatewayError);

  CHECK_THROWS_AS(MockBackend(MockWorldSpec{.p0 = 1.5}, qs), ConfigError);
  CHECK(MockWorldSpec{.seed = 1}.fingerprint() != MockWorldSpec{.seed = 2}.fingerprint());
  MockWorldSpec back;
  from_json(Json(MockWorldSpec{.p0 = 0.3, .seed = 9}), back);
  CHECK(back == MockWorldSpec{.p0 = 0.3, .seed = 9});
}

TEST_CASE("gateway: cache hits are free and skip the backend") {
  const auto qs = synthetic_dataset(2, 1);
  auto counting = std::make_shared<testing::CountingBackend>(std::make_shared<MockBackend>(MockWorldSpec{}, qs));
  Gateway gw(counting);
  const auto req = make_request(qs[0], PromptTag::direct_answer, std::nullopt, 0.7, 3, "reason");

  const auto first = gw.complete(req);
  CHECK_FALSE(first.cached);
  CHECK(first.tokens_in > 0);
  CHECK(counting->samples(PromptTag::direct_answer) == 3);

  const auto second = gw.complete(req);
  CHECK(second.cached);
  CHECK(second.completions == first.completions);
  CHECK(second.tokens_in == 0);
  CHECK(second.tokens_out == 0);
  CHECK(counting->samples(PromptTag::direct_answer) == 3);

  // Overlapping range: only the new indices reach the backend.
  auto wider = req;
  wider.n_samples = 5;
  const auto third = gw.complete(wider);
  CHECK(counting->samples(PromptTag::direct_answer) == 5);
  CHECK(std::vector<std::string>(third.completions.begin(), third.completions.begin() + 3) == first.completions);

  const auto ledger = gw.ledger();
  CHECK(ledger.requests == 3);
  CHECK(ledger.cache_hits == 6);
  CHECK(ledger.generated.at(PromptTag::direct_answer) == 5);
  CHECK(ledger.total_tokens() == first.tokens_in + first.tokens_out + third.tokens_in + third.tokens_out);

  // A different stage is a different draw stream.
  auto other = req;
  other.stage = "label";
  CHECK_FALSE(gw.complete(other).cached);
}

TEST_CASE("gateway: disabled cache calls the backend every time") {
  const auto qs = synthetic_dataset(1, 1);
  auto counting = std::make_shared<testing::CountingBackend>(std::make_shared<MockBackend>(MockWorldSpec{}, qs));
  Gateway gw(counting, GatewayOptions{.use_cache = false});
  const auto req = make_request(qs[0], PromptTag::direct_answer, std::nullopt, 0.7, 1, "reason");
  const auto a = gw.complete(req);
  const auto b = gw.complete(req);
  CHECK(counting->calls(PromptTag::direct_answer) == 2);
  CHECK(a.completions == b.completions);  // the mock is deterministic regardless
  CHECK(gw.ledger().total_tokens() == a.tokens_in + a.tokens_out + b.tokens_in + b.tokens_out);
}

TEST_CASE("gateway: disk cache survives a new gateway") {
  testing::TempDir dir;
  const auto qs = synthetic_dataset(1, 1);
  const auto req = make_request(qs[0], PromptTag::knowledge_gen, std::nullopt, 1.3, 5, "elicit");
  std::vector<std::string> first;
  {
    Gateway gw(std::make_shared<MockBackend>(MockWorldSpec{}, qs), GatewayOptions{.cache_dir = dir.path()});
    first = gw.complete(req).completions;
  }
  auto counting = std::make_shared<testing::CountingBackend>(std::make_shared<MockBackend>(MockWorldSpec{}, qs));
  Gateway gw(counting, GatewayOptions{.cache_dir = dir.path()});
  const auto again = gw.complete(req);
  CHECK(again.completions == first);
  CHECK(again.cached);
  CHECK(counting->calls(PromptTag::knowledge_gen) == 0);

  // A different model id never shares entries.
  MockWorldSpec other_world{.seed = 99};
  auto other = std::make_shared<testing::CountingBackend>(std::make_shared<MockBackend>(other_world, qs));
  Gateway gw2(other, GatewayOptions{.cache_dir = dir.path()});
  CHECK_FALSE(gw2.complete(req).cached);
}

namespace {

class SlowBackend final : public ChatBackend {
 public:
  std::string model_id() const override { return "slow"; }
  bool multi_sample() const override { return false; }
  std::vector<Completion> generate(const ChatRequest&, std::span<const int> indices) override {
    const int now = ++in_flight_;
    int seen = max_seen_.load();
    while (now > seen && !max_seen_.compare_exchange_weak(seen, now)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
    --in_flight_;
    return std::vector<Completion>(indices.size(), Completion{"Answer: (1)", 1, 2, false});
  }
  int max_seen() const { return max_seen_; }

 private:
  std::atomic<int> in_flight_{0};
  std::atomic<int> max_seen_{0};
};

class RejectingBackend final : public ChatBackend {
 public:
  std::string model_id() const override { return "rejecting"; }
  std::vector<Completion> generate(const ChatRequest&, std::span<const int> indices) override {
    if (indices.size() > 1) {
      ++rejected;
      throw MultiSampleRejected();
    }
    ++singles;
    return {Completion{"Answer: (" + std::to_string(indices.front() + 1) + ")", 1, 1, false}};
  }
  std::atomic<int> rejected{0};
  std::atomic<int> singles{0};
};

}  // namespace

TEST_CASE("gateway: concurrency limit bounds backend calls in flight") {
  auto slow = std::make_shared<SlowBackend>();
  Gateway gw(slow, GatewayOptions{.use_cache = false, .concurrency_limit = 2});
  const auto q = testing::make_question();
  util::parallel_for(8, 8, [&](std::size_t i) {
    gw.complete(make_request(q, PromptTag::direct_answer, std::nullopt, 0.7, 3, "reason", static_cast<int>(i) * 3));
  });
  CHECK(slow->max_seen() <= 2);
  CHECK(slow->max_seen() >= 1);
}

TEST_CASE("gateway: falls back to single samples when n > 1 is rejected") {
  auto backend = std::make_shared<RejectingBackend>();
  Gateway gw(backend, GatewayOptions{.use_cache = false});
  const auto resp = gw.complete(make_request(testing::make_question(), PromptTag::direct_answer, std::nullopt, 0.7, 3, "r"));
  CHECK(resp.completions == std::vector<std::string>{"Answer: (1)", "Answer: (2)", "Answer: (3)"});
  CHECK(backend->rejected == 1);
  CHECK(backend->singles == 3);
}

TEST_CASE("endpoint parsing") {
  auto e = Endpoint::parse("https://api.example.com/v1/");
  CHECK(e.origin == "https://api.example.com");
  CHECK(e.prefix == "/v1");
  e = Endpoint::parse("http://127.0.0.1:8080");
  CHECK(e.origin == "http://127.0.0.1:8080");
  CHECK(e.prefix.empty());
  CHECK_THROWS_AS(Endpoint::parse("localhost:80"), ConfigError);
  CHECK_THROWS_AS(Endpoint::parse("ftp://x"), ConfigError);
  CHECK_THROWS_AS(Endpoint::parse("http://"), ConfigError);
}

TEST_CASE("chat response parsing") {
  const auto out = HttpBackend::parse_body(
      R"({"choices":[{"index":1,"message":{"content":"b"}},{"index":0,"message":{"content":"a"}},)"
      R"({"index":2,"message":{"content":null}}],"usage":{"prompt_tokens":10,"completion_tokens":7}})");
  REQUIRE(out.size() == 3);
  CHECK(out[0].text == "a");
  CHECK(out[1].text == "b");
  CHECK(out[2].text.empty());
  CHECK(out[0].tokens_in == 10);
  CHECK(out[1].tokens_in == 0);
  CHECK(out[0].tokens_out + out[1].tokens_out + out[2].tokens_out == 7);
  CHECK_THROWS_AS(HttpBackend::parse_body("<html>"), MalformedResponseError);
  CHECK_THROWS_AS(HttpBackend::parse_body(R"({"choices":[]})"), MalformedResponseError);
  CHECK_THROWS_AS(HttpBackend::parse_body(R"({"choices":[{"text":"x"}]})"), MalformedResponseError);
}

TEST_CASE("http backend against a local server") {
  testing::LocalServer srv;
  std::atomic<int> attempts{0};
  std::atomic<int> mode{0};
  Json last_body;
  std::string last_auth;
  std::mutex mu;
  srv.server().Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    const int attempt = ++attempts;
    const Json body = Json::parse(req.body);
    {
      std::lock_guard lock(mu);
      last_body = body;
      last_auth = req.get_header_value("Authorization");
    }
    const int n = body.value("n", 1);
    switch (mode.load()) {
      case 0:  // two server errors, then success
        if (attempt <= 2) {
          res.status = 503;
          return;
        }
        res.set_content(chat_reply(std::vector<std::string>(static_cast<std::size_t>(n), "Answer: (1)")), "application/json");
        return;
      case 1:
        res.status = 429;
        return;
      case 2:
        res.set_content("not json at all", "text/plain");
        return;
      case 3:  // rejects n > 1
        if (n > 1) {
          res.status = 400;
          res.set_content(R"({"error":"n must be 1"})", "application/json");
          return;
        }
        res.set_content(chat_reply({"Answer: (2)"}), "application/json");
        return;
      case 4:  // truncates multi-sample replies to one choice
        res.set_content(chat_reply({"Answer: (1)"}), "application/json");
        return;
      default:
        res.status = 404;
        return;
    }
  });
  srv.start();
  const auto q = testing::make_question();
  const auto req = make_request(q, PromptTag::direct_answer, std::nullopt, 0.7, 2, "reason");
  const std::vector<int> two{0, 1};

  SUBCASE("retries server errors then succeeds") {
    HttpBackend backend(fast_options(srv.url(), 3));
    const auto out = backend.generate(req, two);
    CHECK(out.size() == 2);
    CHECK(attempts == 3);
    std::lock_guard lock(mu);
    CHECK(last_auth == "Bearer secret");
    CHECK(last_body.at("model") == "test-model");
    CHECK(last_body.at("n") == 2);
    CHECK(last_body.at("temperature").get<double>() == doctest::Approx(0.7));
    CHECK(last_body.at("max_tokens") == default_max_tokens(PromptTag::direct_answer));
    CHECK(last_body.at("messages").size() == req.messages.size());
    CHECK_FALSE(last_body.contains("qid"));
  }
  SUBCASE("persistent 429 becomes a rate-limit error") {
    mode = 1;
    HttpBackend backend(fast_options(srv.url(), 2));
    CHECK_THROWS_AS(backend.generate(req, two), RateLimitError);
    CHECK(attempts == 3);
  }
  SUBCASE("non-JSON body is a malformed response") {
    mode = 2;
    HttpBackend backend(fast_options(srv.url()));
    CHECK_THROWS_AS(backend.generate(req, two), MalformedResponseError);
  }
  SUBCASE("n > 1 rejection falls back to single requests through the gateway") {
    mode = 3;
    auto backend = std::make_shared<HttpBackend>(fast_options(srv.url()));
    Gateway gw(backend);
    auto three = req;
    three.n_samples = 3;
    const auto resp = gw.complete(three);
    CHECK(resp.completions == std::vector<std::string>(3, "Answer: (2)"));
    CHECK_FALSE(backend->multi_sample());
    CHECK(attempts == 4);
  }
  SUBCASE("truncated multi-sample replies are topped up") {
    mode = 4;
    HttpBackend backend(fast_options(srv.url()));
    CHECK(backend.generate(req, two).size() == 2);
    CHECK(attempts == 2);
  }
  SUBCASE("other client errors are not retried") {
    mode = 5;
    HttpBackend backend(fast_options(srv.url(), 3));
    CHECK_THROWS_AS(backend.generate(req, two), GatewayError);
    CHECK(attempts == 1);
  }
}

TEST_CASE("http backend: unreachable endpoint is a network error") {
  HttpBackendOptions o = fast_options("http://127.0.0.1:9", 1);
  o.timeout = std::chrono::seconds(1);
  HttpBackend backend(o);
  const auto req = make_request(testing::make_question(), PromptTag::direct_answer, std::nullopt, 0.7, 1, "reason");
  const std::vector<int> one{0};
  CHECK_THROWS_AS(backend.generate(req, one), NetworkError);
}
