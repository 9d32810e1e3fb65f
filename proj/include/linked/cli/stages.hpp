#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "linked/core/serialization.hpp"
#include "linked/core/types.hpp"
#include "linked/llm/gateway.hpp"
#include "linked/llm/mock.hpp"
#include "linked/metrics/eval.hpp"
#include "linked/reasoning/reasoner.hpp"
#include "linked/scoring/scorer.hpp"

namespace linked::cli {

namespace fs = std::filesystem;

struct Settings {
  RunConfig cfg;
  llm::MockWorldSpec world;  // used when cfg.llm_endpoint == "mock"
  bool world_seed_set = false;  // otherwise the mock world follows cfg.seed
  bool use_cache = true;
  bool force = false;  // re-run stages even when their marker matches

  llm::MockWorldSpec effective_world() const;
};

// Applies a JSON config file: RunConfig keys plus an optional "mock_world"
// object. Unknown keys are a ConfigError.
void apply_config_file(const fs::path& path, Settings& settings);
void apply_config_json(const Json& j, Settings& settings);

enum class ScorerKind { oracle, constant, remote };

struct ScorerChoice {
  ScorerKind kind = ScorerKind::oracle;
  double constant = 0.5;
};

ScorerKind scorer_kind_from_string(const std::string& text);

// Checks everything that can be checked without touching the network.
void validate(const Settings& settings, const ScorerChoice& scorer);

std::unique_ptr<scoring::Scorer> make_scorer(const Settings& settings, const ScorerChoice& choice);
std::unique_ptr<llm::Gateway> make_gateway(const Settings& settings, const std::vector<Question>& questions);

struct StageResult {
  bool skipped = false;
  llm::TokenLedger ledger;
  std::vector<fs::path> outputs;
};

// Sidecar written next to a stage's outputs: the hash of everything the stage
// depends on and the hash of every output. A matching sidecar means the stage
// is already done.
fs::path marker_path(const fs::path& output);
bool stage_complete(const fs::path& marker, const std::string& config_hash);

std::vector<Question> read_dataset(const fs::path& path);

// <out_dir>/pool.jsonl, unlabeled.
StageResult run_elicit(const Settings& s, const fs::path& dataset, const fs::path& out_dir);

// `out` gets the labeled pool; the answers used for labeling go to
// <stem>.samples.jsonl beside it.
StageResult run_label(const Settings& s, const fs::path& dataset, const fs::path& pool, const fs::path& out);

// <out_dir>/train.jsonl and <out_dir>/val.jsonl.
StageResult run_prep(const Settings& s, const fs::path& dataset, const fs::path& pool, const fs::path& out_dir,
                     double val_fraction, std::uint64_t seed);

// `pool` may be empty for strategies that do not use knowledge.
StageResult run_reason(const Settings& s, const fs::path& dataset, const fs::path& pool,
                       const ScorerChoice& scorer, reasoning::Strategy strategy, const fs::path& out);

struct NamedOutcomes {
  std::string name;
  fs::path path;
};

// The baseline appears in the report as its own row.
std::vector<metrics::EvalReport> run_eval(const NamedOutcomes& baseline, const std::vector<NamedOutcomes>& methods,
                                          const fs::path& out_dir, const std::string& dataset_tag,
                                          std::optional<std::uint64_t> seed);

enum class SweepParam { top_k, answer_samples, strategy };
SweepParam sweep_param_from_string(const std::string& text);

// One outcome file per value plus a few-shot baseline and a report, all in
// out_dir.
std::vector<metrics::EvalReport> run_sweep(const Settings& s, const fs::path& dataset, const fs::path& pool,
                                           const ScorerChoice& scorer, reasoning::Strategy strategy,
                                           SweepParam param, const std::vector<std::string>& values,
                                           const fs::path& out_dir);

struct PipelineResult {
  std::vector<metrics::EvalReport> reports;
  std::map<std::string, StageResult> stages;  // "elicit", "label", "prep", "reason:<strategy>"
  std::size_t questions = 0;
};

// elicit -> label -> prep -> reason (few_shot plus `methods`) -> eval, laid
// out under out_dir. A prep failure is logged and the run continues.
PipelineResult run_pipeline(const Settings& s, const fs::path& dataset, const ScorerChoice& scorer,
                            const std::vector<reasoning::Strategy>& methods, const fs::path& out_dir);

}  // namespace linked::cli
