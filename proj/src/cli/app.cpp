#include "linked/cli/app.hpp"

#include <cstdlib>
#include <iostream>
#include <map>

#include <CLI11.hpp>

#include "linked/cli/stages.hpp"
#include "linked/core/dataset.hpp"
#include "linked/core/errors.hpp"
#include "linked/util/log.hpp"

namespace linked::cli {
namespace {

using reasoning::Strategy;

// Flags that override RunConfig keys, shared by every stage command.
struct RunOptions {
  std::string config;
  double knowledge_temperature = 0;
  int knowledge_samples = 0;
  double answer_temperature = 0;
  int answer_samples = 0;
  int top_k = 0;
  std::string llm_endpoint;
  std::string scorer_endpoint;
  std::string cache_dir;
  int concurrency_limit = 0;
  std::uint64_t seed = 0;
  std::string model;
  int max_retries = 0;
  bool no_cache = false;
  bool force = false;
  std::map<std::string, CLI::Option*> given;

  void attach(CLI::App* sub) {
    sub->add_option("--config", config, "JSON config file (flags override it)")->check(CLI::ExistingFile);
    given["kt"] = sub->add_option("--knowledge-temperature", knowledge_temperature, "Knowledge sampling temperature");
    given["ks"] = sub->add_option("--knowledge-samples", knowledge_samples, "Knowledge pieces per question");
    given["at"] = sub->add_option("--answer-temperature", answer_temperature, "Answer sampling temperature");
    given["as"] = sub->add_option("--answer-samples,--n", answer_samples, "Answers sampled per rationale");
    given["k"] = sub->add_option("--top-k", top_k, "Pieces joined into the rationale");
    given["llm"] = sub->add_option("--llm-endpoint", llm_endpoint, "Chat completions base URL, or \"mock\"");
    given["scorer"] = sub->add_option("--scorer-endpoint", scorer_endpoint, "Scoring service base URL");
    given["cache"] = sub->add_option("--cache-dir", cache_dir, "On-disk response cache");
    given["conc"] = sub->add_option("--concurrency-limit", concurrency_limit, "Concurrent model calls");
    given["seed"] = sub->add_option("--seed", seed, "Run seed");
    given["model"] = sub->add_option("--model", model, "Model name sent to the endpoint");
    given["retries"] = sub->add_option("--max-retries", max_retries, "Retries per request");
    sub->add_flag("--no-cache", no_cache, "Disable the response cache");
    sub->add_flag("--force", force, "Re-run stages whose outputs are already up to date");
  }

  bool has(const char* key) const { return given.at(key)->count() > 0; }

  // defaults < config file < LINKED_SCORER_URL < flags
  Settings resolve(Settings base) const {
    if (!config.empty()) apply_config_file(config, base);
    if (const char* env = std::getenv("LINKED_SCORER_URL"); env && *env) base.cfg.scorer_endpoint = env;
    RunConfig& c = base.cfg;
    if (has("kt")) c.knowledge_temperature = knowledge_temperature;
    if (has("ks")) c.knowledge_samples = knowledge_samples;
    if (has("at")) c.answer_temperature = answer_temperature;
    if (has("as")) c.answer_samples = answer_samples;
    if (has("k")) c.top_k = top_k;
    if (has("llm")) c.llm_endpoint = llm_endpoint;
    if (has("scorer")) c.scorer_endpoint = scorer_endpoint;
    if (has("cache")) c.cache_dir = cache_dir;
    if (has("conc")) c.concurrency_limit = concurrency_limit;
    if (has("seed")) c.seed = seed;
    if (has("model")) c.model = model;
    if (has("retries")) c.max_retries = max_retries;
    base.use_cache = !no_cache;
    base.force = force;
    return base;
  }
};

struct ScorerOptions {
  std::string kind = "oracle";
  double value = 0.5;

  void attach(CLI::App* sub) {
    sub->add_option("--scorer", kind, "Knowledge scorer")
        ->check(CLI::IsMember({"oracle", "constant", "remote"}))
        ->capture_default_str();
    sub->add_option("--scorer-value", value, "Score used by --scorer constant")->capture_default_str();
  }

  ScorerChoice choice() const { return {scorer_kind_from_string(kind), value}; }
};

std::vector<Strategy> parse_strategies(const std::vector<std::string>& names) {
  std::vector<Strategy> out;
  for (const auto& n : names) out.push_back(reasoning::strategy_from_string(n));
  return out;
}

std::string strategy_names() {
  return "few_shot, cot, cot_sc, mcr, oo, om, mo, mm";
}

void print_table(const std::vector<metrics::EvalReport>& reports) {
  std::cout << metrics::render_table(reports);
  for (const auto& r : reports)
    if (!r.note.empty()) std::cout << r.method << ": " << r.note << "\n";
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"Knowledge elicitation, labeling, filtering and consistent reasoning over multiple-choice QA."};
  app.name("linked");
  app.require_subcommand(1);
  app.fallthrough();
  app.failure_message(CLI::FailureMessage::help);
  bool quiet = false;
  app.add_flag("--quiet,-q", quiet, "Suppress structured logs on stderr");

  // elicit
  RunOptions elicit_opts;
  std::string elicit_dataset, elicit_out;
  auto* elicit = app.add_subcommand("elicit", "Sample knowledge pieces for every question");
  elicit->add_option("--dataset", elicit_dataset, "Question JSONL")->required()->check(CLI::ExistingFile);
  elicit->add_option("--out", elicit_out, "Output directory (pool.jsonl)")->required();
  elicit_opts.attach(elicit);

  // label
  RunOptions label_opts;
  std::string label_dataset, label_pool, label_out;
  auto* label = app.add_subcommand("label", "Label each knowledge piece by its effect on answering");
  label->add_option("--dataset", label_dataset, "Question JSONL")->required()->check(CLI::ExistingFile);
  label->add_option("--pool", label_pool, "Pool JSONL from elicit")->required()->check(CLI::ExistingFile);
  label->add_option("--out", label_out, "Labeled pool JSONL")->required();
  label_opts.attach(label);

  // prep
  RunOptions prep_opts;
  std::string prep_dataset, prep_pool, prep_out;
  double val_fraction = 0.1;
  auto* prep = app.add_subcommand("prep", "Export scorer training data from a labeled pool");
  prep->add_option("--dataset", prep_dataset, "Question JSONL")->required()->check(CLI::ExistingFile);
  prep->add_option("--pool", prep_pool, "Labeled pool JSONL")->required()->check(CLI::ExistingFile);
  prep->add_option("--out", prep_out, "Output directory (train.jsonl, val.jsonl)")->required();
  prep->add_option("--val-fraction", val_fraction, "Share of questions held out")->capture_default_str();
  prep_opts.attach(prep);

  // reason
  RunOptions reason_opts;
  ScorerOptions reason_scorer;
  std::string reason_dataset, reason_pool, reason_out, reason_strategy = "mcr";
  auto* reason = app.add_subcommand("reason", "Answer every question with one strategy");
  reason->add_option("--dataset", reason_dataset, "Question JSONL")->required()->check(CLI::ExistingFile);
  reason->add_option("--pool", reason_pool, "Labeled or unlabeled pool JSONL")->check(CLI::ExistingFile);
  reason->add_option("--strategy", reason_strategy, "One of " + strategy_names())->capture_default_str();
  reason->add_option("--out", reason_out, "Outcome JSONL")->required();
  reason_scorer.attach(reason);
  reason_opts.attach(reason);

  // eval
  std::string eval_baseline, eval_baseline_name = "few_shot", eval_out, eval_tag;
  std::vector<std::string> eval_methods, eval_names;
  std::uint64_t eval_seed = 0;
  auto* eval = app.add_subcommand("eval", "Accuracy and EPS of method runs against a baseline run");
  eval->add_option("--baseline", eval_baseline, "Baseline outcome JSONL")->required()->check(CLI::ExistingFile);
  eval->add_option("--baseline-name", eval_baseline_name, "Row name for the baseline")->capture_default_str();
  eval->add_option("--method", eval_methods, "Method outcome JSONL (repeatable)")->required()->check(CLI::ExistingFile);
  eval->add_option("--name", eval_names, "Row name per --method (default: file stem)");
  eval->add_option("--out", eval_out, "Report directory")->required();
  eval->add_option("--dataset-tag", eval_tag, "Dataset name recorded in the report");
  auto* eval_seed_opt = eval->add_option("--seed", eval_seed, "Run seed recorded in the report");

  // sweep
  RunOptions sweep_opts;
  ScorerOptions sweep_scorer;
  std::string sweep_dataset, sweep_pool, sweep_param, sweep_out, sweep_strategy = "mcr";
  std::vector<std::string> sweep_values;
  auto* sweep = app.add_subcommand("sweep", "Run one strategy over a range of settings");
  sweep->add_option("--dataset", sweep_dataset, "Question JSONL")->required()->check(CLI::ExistingFile);
  sweep->add_option("--pool", sweep_pool, "Labeled pool JSONL")->check(CLI::ExistingFile);
  sweep->add_option("--param", sweep_param, "Swept parameter")
      ->required()
      ->check(CLI::IsMember({"top_k", "answer_samples", "n", "strategy"}));
  sweep->add_option("--values", sweep_values, "Comma-separated values")->required()->delimiter(',');
  sweep->add_option("--strategy", sweep_strategy, "Strategy when not sweeping it")->capture_default_str();
  sweep->add_option("--out", sweep_out, "Output directory")->required();
  sweep_scorer.attach(sweep);
  sweep_opts.attach(sweep);

  // pipeline
  RunOptions pipe_opts;
  ScorerOptions pipe_scorer;
  std::string pipe_dataset, pipe_out;
  std::vector<std::string> pipe_methods = {"cot", "cot_sc", "mcr"};
  auto* pipeline = app.add_subcommand("pipeline", "elicit, label, prep, reason and eval in one run");
  pipeline->add_option("--dataset", pipe_dataset, "Question JSONL")->required()->check(CLI::ExistingFile);
  pipeline->add_option("--methods", pipe_methods, "Strategies compared with few_shot")
      ->delimiter(',')
      ->capture_default_str();
  pipeline->add_option("--out", pipe_out, "Output directory")->required();
  pipe_scorer.attach(pipeline);
  pipe_opts.attach(pipeline);

  // mock-bench
  RunOptions bench_opts;
  std::string bench_out;
  std::size_t bench_questions = 1000;
  int bench_options = 2;
  llm::MockWorldSpec bench_world{.p0 = 0.4, .p_pos = 0.9, .p_neg = 0.2, .positive_rate = 0.5};
  std::vector<std::string> bench_methods = {"cot", "cot_sc", "mcr", "oo", "om", "mo", "mm"};
  auto* bench = app.add_subcommand("mock-bench", "Synthetic dataset plus mock model, full pipeline offline");
  bench->add_option("--out", bench_out, "Output directory")->required();
  bench->add_option("--questions", bench_questions, "Synthetic questions")->capture_default_str();
  bench->add_option("--options", bench_options, "Options per question")->capture_default_str();
  auto* p0 = bench->add_option("--p0", bench_world.p0, "P(correct) answering directly")->capture_default_str();
  auto* p_pos = bench->add_option("--p-pos", bench_world.p_pos, "P(correct) with positive knowledge")->capture_default_str();
  auto* p_neg = bench->add_option("--p-neg", bench_world.p_neg, "P(correct) with negative knowledge")->capture_default_str();
  auto* pos_rate = bench->add_option("--positive-rate", bench_world.positive_rate, "P(generated knowledge is positive)")
                       ->capture_default_str();
  auto* empty = bench->add_option("--empty-rate", bench_world.empty_rate, "P(blank knowledge completion)");
  bench->add_option("--methods", bench_methods, "Strategies compared with few_shot")->delimiter(',')->capture_default_str();
  bench_opts.attach(bench);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }
  util::set_logging(!quiet);

  const CLI::App* chosen = app.get_subcommands().front();
  const std::string stage = chosen->get_name();
  try {
    if (elicit->parsed()) {
      const auto s = elicit_opts.resolve({});
      validate(s, {});
      run_elicit(s, elicit_dataset, elicit_out);
    } else if (label->parsed()) {
      const auto s = label_opts.resolve({});
      validate(s, {});
      run_label(s, label_dataset, label_pool, label_out);
    } else if (prep->parsed()) {
      const auto s = prep_opts.resolve({});
      run_prep(s, prep_dataset, prep_pool, prep_out, val_fraction, s.cfg.seed);
    } else if (reason->parsed()) {
      const auto s = reason_opts.resolve({});
      run_reason(s, reason_dataset, reason_pool, reason_scorer.choice(), reasoning::strategy_from_string(reason_strategy),
                 reason_out);
    } else if (eval->parsed()) {
      if (!eval_names.empty() && eval_names.size() != eval_methods.size())
        throw ConfigError("--name must be given once per --method");
      std::vector<NamedOutcomes> methods;
      for (std::size_t i = 0; i < eval_methods.size(); ++i) {
        const fs::path path = eval_methods[i];
        methods.push_back({eval_names.empty() ? path.stem().string() : eval_names[i], path});
      }
      const std::optional<std::uint64_t> seed =
          eval_seed_opt->count() ? std::optional<std::uint64_t>(eval_seed) : std::nullopt;
      print_table(run_eval({eval_baseline_name, eval_baseline}, methods, eval_out, eval_tag, seed));
    } else if (sweep->parsed()) {
      const auto s = sweep_opts.resolve({});
      const auto choice = sweep_scorer.choice();
      validate(s, choice);
      print_table(run_sweep(s, sweep_dataset, sweep_pool, choice, reasoning::strategy_from_string(sweep_strategy),
                            sweep_param_from_string(sweep_param), sweep_values, sweep_out));
    } else if (pipeline->parsed()) {
      const auto s = pipe_opts.resolve({});
      const auto choice = pipe_scorer.choice();
      const auto methods = parse_strategies(pipe_methods);
      print_table(run_pipeline(s, pipe_dataset, choice, methods, pipe_out).reports);
    } else if (bench->parsed()) {
      Settings base;
      base.cfg.top_k = 1;
      base.world = bench_world;
      auto s = bench_opts.resolve(base);
      // Explicit world flags win over the config file's mock_world.
      if (p0->count()) s.world.p0 = bench_world.p0;
      if (p_pos->count()) s.world.p_pos = bench_world.p_pos;
      if (p_neg->count()) s.world.p_neg = bench_world.p_neg;
      if (pos_rate->count()) s.world.positive_rate = bench_world.positive_rate;
      if (empty->count()) s.world.empty_rate = bench_world.empty_rate;
      if (s.cfg.llm_endpoint != "mock") throw ConfigError("mock-bench runs against the mock model only");
      const auto methods = parse_strategies(bench_methods);
      validate(s, {});
      if (bench_questions == 0) throw ConfigError("--questions must be >= 1");
      if (bench_options < 2) throw ConfigError("--options must be >= 2");

      fs::create_directories(bench_out);
      const fs::path dataset = fs::path(bench_out) / "dataset.jsonl";
      save_dataset(llm::synthetic_dataset(bench_questions, s.cfg.seed, bench_options), dataset);
      print_table(run_pipeline(s, dataset, {}, methods, bench_out).reports);
    }
  } catch (const ConfigError& e) {
    util::log_event(stage, "failed", Json{{"error", e.what()}, {"kind", "config"}});
    std::cerr << "linked " << stage << ": configuration error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    util::log_event(stage, "failed", Json{{"error", e.what()}});
    std::cerr << "linked " << stage << ": " << e.what() << "\n";
    return kExitStageError;
  }
  return kExitOk;
}

int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace linked::cli
