#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "refbench/dataset.hpp"
#include "refbench/metrics.hpp"
#include "refbench/provider.hpp"
#include "refbench/scoring.hpp"

namespace refbench::pipeline {

// Declarative run description; CLI flags map 1:1 onto these fields. Relative
// paths in the file resolve against the config file's directory.
struct RunConfig {
  std::filesystem::path bank;
  std::vector<std::string> languages;  // empty = every bank language
  std::vector<dataset::Setting> settings{dataset::Setting::Normal, dataset::Setting::Simple};
  std::vector<dataset::InstanceKind> kinds{dataset::InstanceKind::ClearRef,
                                           dataset::InstanceKind::SharedRef};
  std::vector<provider::ModelConfig> models;
  provider::ModelConfig judge;
  std::optional<provider::ModelConfig> verifier;
  std::filesystem::path cache_dir = "cache";
  std::filesystem::path output_dir = "out";
  std::uint64_t seed = 0;
  int concurrency = 4;
  std::string permutations = "fixed";  // fixed | all
  scoring::HedgeRule hedge_rule = scoring::HedgeRule::Literal;
  metrics::PositionAttribution position_attribution = metrics::PositionAttribution::MassSplit;
  bool strict_judge_json = false;
  std::string report_format = "markdown";  // csv | json | markdown

  std::string dpo_base_model;
  std::vector<std::string> dpo_donor_models;  // empty = all other models
  std::optional<std::string> dpo_relation;    // e.g. "CapableOf fly"
  std::filesystem::path dpo_seeds;            // generic clarification templates
  int dpo_generic_per_language = 0;

  // True when every configured endpoint (models, judge, verifier) is a mock:
  // such runs use a zero clock and are byte-reproducible.
  bool all_mock() const;
};

provider::ModelConfig model_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);

// Subcommands. Each writes into its own output_dir subdirectory together with
// a manifest.json describing inputs, seed and versions.
void cmd_build_dataset(const RunConfig& cfg);
void cmd_run_eval(const RunConfig& cfg);
void cmd_judge(const RunConfig& cfg);
void cmd_score(const RunConfig& cfg);
void cmd_report(const RunConfig& cfg);
void cmd_validate_judge(const RunConfig& cfg, const std::filesystem::path& human_fixture,
                        const std::filesystem::path& verdicts_file);
void cmd_export_dpo(const RunConfig& cfg);
void cmd_ablate_permutations(const RunConfig& cfg);

}  // namespace refbench::pipeline
