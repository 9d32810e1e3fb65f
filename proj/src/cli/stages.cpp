#include "linked/cli/stages.hpp"

#include <algorithm>
#include <set>

#include "linked/core/dataset.hpp"
#include "linked/core/errors.hpp"
#include "linked/core/stage_io.hpp"
#include "linked/knowledge/pool.hpp"
#include "linked/llm/http_backend.hpp"
#include "linked/reward/training_set.hpp"
#include "linked/util/hash.hpp"
#include "linked/util/log.hpp"

namespace linked::cli {
namespace {

const std::set<std::string> kConfigKeys = {
    "knowledge_temperature", "knowledge_samples", "answer_temperature", "answer_samples", "top_k",
    "llm_endpoint",          "scorer_endpoint",   "cache_dir",          "concurrency_limit", "seed",
    "model",                 "max_retries",       "retry_backoff_ms",   "request_timeout_s", "mock_world"};
const std::set<std::string> kWorldKeys = {"p0", "p_pos", "p_neg", "positive_rate", "seed", "empty_rate"};

bool is_mock(const Settings& s) { return s.cfg.llm_endpoint == "mock"; }

std::string backend_identity(const Settings& s) {
  if (is_mock(s)) return "mock-" + s.effective_world().fingerprint();
  return s.cfg.llm_endpoint + "#" + s.cfg.model;
}

std::string file_digest(const fs::path& path) { return util::sha256_hex(read_file(path)); }

std::string config_hash(const Json& params) { return util::sha256_hex(params.dump()); }

Json ledger_json(const llm::TokenLedger& l) {
  return Json{{"requests", l.requests},
              {"cache_hits", l.cache_hits},
              {"tokens_in", l.tokens_in},
              {"tokens_out", l.tokens_out}};
}

Json failures_json(const std::vector<knowledge::PoolFailure>& failures) {
  Json out = Json::array();
  for (const auto& f : failures) out.push_back(Json{{"qid", f.qid}, {"reason", f.reason}});
  return out;
}

void write_marker(const fs::path& marker, std::string_view stage, const std::string& hash,
                  const std::vector<fs::path>& outputs, Json extra = Json::object()) {
  Json j = Json::object();
  j["stage"] = stage;
  j["config_hash"] = hash;
  Json files = Json::object();
  for (const auto& out : outputs) files[out.filename().string()] = file_digest(out);
  j["outputs"] = std::move(files);
  for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
  write_file_atomic(marker, j.dump(2) + "\n");
}

void ensure_dir(const fs::path& dir) {
  if (dir.empty()) return;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

bool skip_if_done(const Settings& s, std::string_view stage, const fs::path& marker, const std::string& hash) {
  if (s.force || !stage_complete(marker, hash)) return false;
  util::log_event(stage, "skipped", Json{{"reason", "outputs match config"}, {"marker", marker.string()}});
  return true;
}

std::vector<int> parse_ints(const std::vector<std::string>& values, const std::string& what) {
  std::vector<int> out;
  for (const auto& v : values) {
    std::size_t used = 0;
    int parsed = 0;
    try {
      parsed = std::stoi(v, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != v.size() || v.empty()) throw ConfigError(what + ": not an integer: \"" + v + "\"");
    out.push_back(parsed);
  }
  return out;
}

}  // namespace

llm::MockWorldSpec Settings::effective_world() const {
  llm::MockWorldSpec w = world;
  if (!world_seed_set) w.seed = cfg.seed;
  return w;
}

void apply_config_json(const Json& j, Settings& settings) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!kConfigKeys.count(it.key())) throw ConfigError("unknown config key \"" + it.key() + "\"");
  merge_from_json(j, settings.cfg);
  if (auto it = j.find("mock_world"); it != j.end() && !it->is_null()) {
    if (!it->is_object()) throw ConfigError("mock_world must be a JSON object");
    for (auto w = it->begin(); w != it->end(); ++w)
      if (!kWorldKeys.count(w.key())) throw ConfigError("unknown mock_world key \"" + w.key() + "\"");
    try {
      from_json(*it, settings.world);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("mock_world: ") + e.what());
    }
    if (it->contains("seed")) settings.world_seed_set = true;
  }
}

void apply_config_file(const fs::path& path, Settings& settings) {
  Json j;
  try {
    j = Json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
  apply_config_json(j, settings);
}

ScorerKind scorer_kind_from_string(const std::string& text) {
  if (text == "oracle") return ScorerKind::oracle;
  if (text == "constant") return ScorerKind::constant;
  if (text == "remote") return ScorerKind::remote;
  throw ConfigError("unknown scorer \"" + text + "\" (expected oracle, constant or remote)");
}

void validate(const Settings& settings, const ScorerChoice& scorer) {
  settings.cfg.validate();
  if (is_mock(settings)) settings.effective_world().validate();
  if (scorer.kind == ScorerKind::remote && (!settings.cfg.scorer_endpoint || settings.cfg.scorer_endpoint->empty()))
    throw ConfigError("--scorer remote needs a scorer endpoint (--scorer-endpoint, config scorer_endpoint, or LINKED_SCORER_URL)");
  if (scorer.kind == ScorerKind::constant && !(scorer.constant >= 0.0 && scorer.constant <= 1.0))
    throw ConfigError("constant scorer value must be in [0,1]");
}

std::unique_ptr<scoring::Scorer> make_scorer(const Settings& settings, const ScorerChoice& choice) {
  switch (choice.kind) {
    case ScorerKind::oracle: return std::make_unique<scoring::OracleScorer>();
    case ScorerKind::constant: return std::make_unique<scoring::ConstantScorer>(choice.constant);
    case ScorerKind::remote: {
      scoring::RemoteScorerOptions opts;
      opts.endpoint = settings.cfg.scorer_endpoint.value_or("");
      opts.timeout = std::chrono::seconds(settings.cfg.request_timeout_s);
      opts.max_retries = settings.cfg.max_retries;
      opts.backoff = std::chrono::milliseconds(settings.cfg.retry_backoff_ms);
      return std::make_unique<scoring::RemoteScorer>(std::move(opts));
    }
  }
  throw ConfigError("unknown scorer");
}

std::unique_ptr<llm::Gateway> make_gateway(const Settings& settings, const std::vector<Question>& questions) {
  std::shared_ptr<llm::ChatBackend> backend;
  if (is_mock(settings)) {
    backend = std::make_shared<llm::MockBackend>(settings.effective_world(), questions);
  } else {
    llm::HttpBackendOptions opts;
    opts.endpoint = settings.cfg.llm_endpoint;
    opts.model = settings.cfg.model;
    opts.api_key = llm::api_key_from_env();
    opts.max_retries = settings.cfg.max_retries;
    opts.backoff = std::chrono::milliseconds(settings.cfg.retry_backoff_ms);
    opts.timeout = std::chrono::seconds(settings.cfg.request_timeout_s);
    backend = std::make_shared<llm::HttpBackend>(std::move(opts));
  }
  llm::GatewayOptions gw;
  gw.use_cache = settings.use_cache;
  gw.cache_dir = settings.cfg.cache_dir;
  gw.concurrency_limit = settings.cfg.concurrency_limit;
  return std::make_unique<llm::Gateway>(std::move(backend), std::move(gw));
}

fs::path marker_path(const fs::path& output) {
  fs::path p = output;
  p.replace_extension(".meta.json");
  return p;
}

bool stage_complete(const fs::path& marker, const std::string& hash) {
  std::error_code ec;
  if (!fs::exists(marker, ec)) return false;
  try {
    const Json j = Json::parse(read_file(marker));
    if (j.at("config_hash").get<std::string>() != hash) return false;
    for (auto it = j.at("outputs").begin(); it != j.at("outputs").end(); ++it) {
      const fs::path out = marker.parent_path() / it.key();
      if (!fs::exists(out, ec) || file_digest(out) != it.value().get<std::string>()) return false;
    }
    return true;
  } catch (const std::exception&) {
    return false;
  }
}

std::vector<Question> read_dataset(const fs::path& path) {
  return load_dataset(path, DatasetFormat::jsonl, path.stem().string());
}

StageResult run_elicit(const Settings& s, const fs::path& dataset, const fs::path& out_dir) {
  const auto questions = read_dataset(dataset);
  ensure_dir(out_dir);
  const fs::path out = out_dir / "pool.jsonl";
  const fs::path marker = marker_path(out);
  const std::string hash = config_hash(Json{{"stage", "elicit"},
                                            {"backend", backend_identity(s)},
                                            {"dataset", file_digest(dataset)},
                                            {"knowledge_temperature", s.cfg.knowledge_temperature},
                                            {"knowledge_samples", s.cfg.knowledge_samples}});
  StageResult result;
  result.outputs = {out};
  if (skip_if_done(s, "elicit", marker, hash)) {
    result.skipped = true;
    return result;
  }

  util::log_event("elicit", "start", Json{{"questions", questions.size()}});
  auto gateway = make_gateway(s, questions);
  auto elicited = knowledge::elicit_all(questions, s.cfg, *gateway);
  if (elicited.records.empty()) throw ElicitationError("no knowledge elicited for any question");

  persist_stage(elicited.records, out);
  result.ledger = gateway->ledger();
  write_marker(marker, "elicit", hash, result.outputs,
               Json{{"ledger", ledger_json(result.ledger)}, {"failures", failures_json(elicited.failures)}});
  util::log_event("elicit", "done",
                  Json{{"records", elicited.records.size()},
                       {"failed_questions", elicited.failures.size()},
                       {"tokens", result.ledger.total_tokens()}});
  return result;
}

StageResult run_label(const Settings& s, const fs::path& dataset, const fs::path& pool, const fs::path& out) {
  const auto questions = read_dataset(dataset);
  const auto records = load_stage<KnowledgeRecord>(pool);
  ensure_dir(out.parent_path());
  const fs::path samples_out = out.parent_path() / (out.stem().string() + ".samples.jsonl");
  const fs::path marker = marker_path(out);
  const std::string hash = config_hash(Json{{"stage", "label"},
                                            {"backend", backend_identity(s)},
                                            {"dataset", file_digest(dataset)},
                                            {"pool", file_digest(pool)},
                                            {"answer_temperature", s.cfg.answer_temperature}});
  StageResult result;
  result.outputs = {out, samples_out};
  if (skip_if_done(s, "label", marker, hash)) {
    result.skipped = true;
    return result;
  }

  util::log_event("label", "start", Json{{"questions", questions.size()}, {"records", records.size()}});
  auto gateway = make_gateway(s, questions);
  auto built = knowledge::label_pool(questions, records, s.cfg, *gateway);
  if (built.records.empty()) throw DataError("labeling produced no records");

  persist_stage(built.records, out);
  persist_stage(built.samples, samples_out);
  result.ledger = gateway->ledger();
  write_marker(marker, "label", hash, result.outputs,
               Json{{"ledger", ledger_json(result.ledger)}, {"failures", failures_json(built.failures)}});
  const auto positive = std::count_if(built.records.begin(), built.records.end(),
                                      [](const auto& r) { return r.label == Label::positive; });
  util::log_event("label", "done",
                  Json{{"records", built.records.size()},
                       {"positive", positive},
                       {"failed_questions", built.failures.size()},
                       {"tokens", result.ledger.total_tokens()}});
  return result;
}

StageResult run_prep(const Settings& s, const fs::path& dataset, const fs::path& pool, const fs::path& out_dir,
                     double val_fraction, std::uint64_t seed) {
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw ConfigError("--val-fraction must be in (0,1)");
  const auto questions = read_dataset(dataset);
  const auto records = load_stage<KnowledgeRecord>(pool);
  ensure_dir(out_dir);
  const fs::path train_out = out_dir / "train.jsonl";
  const fs::path val_out = out_dir / "val.jsonl";
  const fs::path marker = out_dir / "prep.meta.json";
  const std::string hash = config_hash(Json{{"stage", "prep"},
                                            {"dataset", file_digest(dataset)},
                                            {"pool", file_digest(pool)},
                                            {"val_fraction", val_fraction},
                                            {"seed", seed}});
  StageResult result;
  result.outputs = {train_out, val_out};
  if (skip_if_done(s, "prep", marker, hash)) {
    result.skipped = true;
    return result;
  }

  const auto split = reward::prepare_training_set(records, questions, {1.0 - val_fraction, val_fraction}, seed);
  reward::export_training_set(split.train, train_out);
  reward::export_training_set(split.val, val_out);
  write_marker(marker, "prep", hash, result.outputs);
  util::log_event("prep", "done", Json{{"train", split.train.size()}, {"val", split.val.size()}});
  return result;
}

StageResult run_reason(const Settings& s, const fs::path& dataset, const fs::path& pool,
                       const ScorerChoice& scorer_choice, reasoning::Strategy strategy, const fs::path& out) {
  const std::string name(reasoning::to_string(strategy));
  const bool needs_pool = reasoning::uses_pool(strategy);
  if (needs_pool && pool.empty()) throw ConfigError("strategy " + name + " needs --pool");
  validate(s, needs_pool ? scorer_choice : ScorerChoice{});

  const auto questions = read_dataset(dataset);
  std::vector<KnowledgeRecord> records;
  if (needs_pool) records = load_stage<KnowledgeRecord>(pool);
  ensure_dir(out.parent_path());
  const fs::path marker = marker_path(out);

  Json params{{"stage", "reason"},
              {"strategy", name},
              {"backend", backend_identity(s)},
              {"dataset", file_digest(dataset)},
              {"answer_temperature", s.cfg.answer_temperature}};
  if (strategy != reasoning::Strategy::few_shot && strategy != reasoning::Strategy::cot)
    params["answer_samples"] = s.cfg.answer_samples;
  if (needs_pool) {
    params["pool"] = file_digest(pool);
    params["top_k"] = s.cfg.top_k;
    switch (scorer_choice.kind) {
      case ScorerKind::oracle: params["scorer"] = "oracle"; break;
      case ScorerKind::constant: params["scorer"] = "constant:" + std::to_string(scorer_choice.constant); break;
      case ScorerKind::remote: params["scorer"] = "remote:" + s.cfg.scorer_endpoint.value_or(""); break;
    }
  }
  const std::string hash = config_hash(params);
  StageResult result;
  result.outputs = {out};
  const std::string stage = "reason:" + name;
  if (skip_if_done(s, stage, marker, hash)) {
    result.skipped = true;
    return result;
  }

  std::unique_ptr<scoring::Scorer> scorer;
  if (needs_pool) {
    scorer = make_scorer(s, scorer_choice);
    if (auto* remote = dynamic_cast<scoring::RemoteScorer*>(scorer.get()); remote && !remote->healthy())
      throw ScorerError("scorer at " + s.cfg.scorer_endpoint.value_or("") +
                        " is not serving (GET /healthz failed); train and serve the reward model on the "
                        "prep output, or use --scorer oracle");
  }

  util::log_event(stage, "start", Json{{"questions", questions.size()}});
  auto gateway = make_gateway(s, questions);
  const auto run = reasoning::reason_all(questions, records, scorer.get(), s.cfg, *gateway, strategy);
  for (const auto& o : run.outcomes)
    if (!o.note.empty()) util::log_event(stage, "flagged", Json{{"qid", o.qid}, {"note", o.note}});

  persist_stage(run.outcomes, out);
  result.ledger = gateway->ledger();
  write_marker(marker, stage, hash, result.outputs, Json{{"ledger", ledger_json(result.ledger)}});
  const auto correct =
      std::count_if(run.outcomes.begin(), run.outcomes.end(), [](const auto& o) { return o.correct; });
  util::log_event(stage, "done",
                  Json{{"questions", run.outcomes.size()}, {"correct", correct}, {"tokens", result.ledger.total_tokens()}});
  return result;
}

std::vector<metrics::EvalReport> run_eval(const NamedOutcomes& baseline, const std::vector<NamedOutcomes>& methods,
                                          const fs::path& out_dir, const std::string& dataset_tag,
                                          std::optional<std::uint64_t> seed) {
  const auto base = load_stage<reasoning::ReasoningOutcome>(baseline.path);
  std::vector<metrics::EvalReport> reports;
  auto add = [&](const std::string& name, const std::vector<reasoning::ReasoningOutcome>& outcomes) {
    auto r = metrics::evaluate(name, base, outcomes, dataset_tag);
    r.seed = seed;
    reports.push_back(std::move(r));
  };
  add(baseline.name, base);
  for (const auto& m : methods) {
    if (m.name == baseline.name) throw ConfigError("method name \"" + m.name + "\" repeats the baseline's");
    add(m.name, load_stage<reasoning::ReasoningOutcome>(m.path));
  }
  metrics::report(reports, out_dir);
  util::log_event("eval", "done", Json{{"runs", reports.size()}, {"out", out_dir.string()}});
  return reports;
}

SweepParam sweep_param_from_string(const std::string& text) {
  if (text == "top_k") return SweepParam::top_k;
  if (text == "answer_samples" || text == "n") return SweepParam::answer_samples;
  if (text == "strategy") return SweepParam::strategy;
  throw ConfigError("unknown sweep parameter \"" + text + "\" (expected top_k, answer_samples or strategy)");
}

std::vector<metrics::EvalReport> run_sweep(const Settings& s, const fs::path& dataset, const fs::path& pool,
                                           const ScorerChoice& scorer, reasoning::Strategy strategy,
                                           SweepParam param, const std::vector<std::string>& values,
                                           const fs::path& out_dir) {
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  struct Setting {
    std::string name;
    std::string file;
    Settings settings;
    reasoning::Strategy strategy;
  };
  std::vector<Setting> settings;
  const char* param_name = param == SweepParam::top_k ? "top_k" : param == SweepParam::answer_samples ? "answer_samples" : "strategy";
  std::vector<int> numbers;
  if (param != SweepParam::strategy) numbers = parse_ints(values, param_name);
  for (std::size_t i = 0; i < values.size(); ++i) {
    Setting entry{std::string(param_name) + "=" + values[i], std::string(param_name) + "_" + values[i] + ".jsonl", s,
                  strategy};
    if (param == SweepParam::top_k) entry.settings.cfg.top_k = numbers[i];
    if (param == SweepParam::answer_samples) entry.settings.cfg.answer_samples = numbers[i];
    if (param == SweepParam::strategy) entry.strategy = reasoning::strategy_from_string(values[i]);
    validate(entry.settings, scorer);
    settings.push_back(std::move(entry));
  }

  ensure_dir(out_dir);
  const fs::path baseline = out_dir / "few_shot.jsonl";
  run_reason(s, dataset, {}, scorer, reasoning::Strategy::few_shot, baseline);
  std::vector<NamedOutcomes> methods;
  for (const auto& entry : settings) {
    run_reason(entry.settings, dataset, pool, scorer, entry.strategy, out_dir / entry.file);
    methods.push_back({entry.name, out_dir / entry.file});
  }
  const auto questions = read_dataset(dataset);
  return run_eval({"few_shot", baseline}, methods, out_dir, questions.empty() ? "" : questions.front().dataset_tag,
                  s.cfg.seed);
}

PipelineResult run_pipeline(const Settings& s, const fs::path& dataset, const ScorerChoice& scorer,
                            const std::vector<reasoning::Strategy>& methods, const fs::path& out_dir) {
  validate(s, scorer);
  const auto questions = read_dataset(dataset);
  ensure_dir(out_dir);

  PipelineResult result;
  result.questions = questions.size();
  result.stages["elicit"] = run_elicit(s, dataset, out_dir);
  const fs::path labeled = out_dir / "labeled_pool.jsonl";
  result.stages["label"] = run_label(s, dataset, out_dir / "pool.jsonl", labeled);
  try {
    result.stages["prep"] = run_prep(s, dataset, labeled, out_dir / "train", 0.1, s.cfg.seed);
  } catch (const DataError& e) {
    util::log_event("prep", "warning", Json{{"message", e.what()}});
  }

  const fs::path outcomes = out_dir / "outcomes";
  const fs::path baseline = outcomes / "few_shot.jsonl";
  result.stages["reason:few_shot"] = run_reason(s, dataset, {}, scorer, reasoning::Strategy::few_shot, baseline);
  std::vector<NamedOutcomes> runs;
  for (auto strategy : methods) {
    if (strategy == reasoning::Strategy::few_shot) continue;
    const std::string name(reasoning::to_string(strategy));
    if (std::any_of(runs.begin(), runs.end(), [&](const auto& r) { return r.name == name; })) continue;
    const fs::path out = outcomes / (name + ".jsonl");
    result.stages["reason:" + name] = run_reason(s, dataset, labeled, scorer, strategy, out);
    runs.push_back({name, out});
  }
  result.reports = run_eval({"few_shot", baseline}, runs, out_dir / "report",
                            questions.empty() ? "" : questions.front().dataset_tag, s.cfg.seed);
  return result;
}

}  // namespace linked::cli
