#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "refbench/error.hpp"
#include "refbench/pipeline.hpp"
#include "refbench/version.hpp"

namespace {

using refbench::pipeline::RunConfig;

// Flags mirror config-file keys one-to-one; a flag simply replaces the key's
// value. Paths given on the command line are relative to the working
// directory, paths inside the config file to the file itself.
struct Flags {
  std::string bank;
  std::vector<std::string> languages;
  std::vector<std::string> settings;
  std::vector<std::string> kinds;
  std::string cache_dir;
  std::string output_dir;
  std::uint64_t seed = 0;
  int concurrency = 0;
  std::string permutations;
  std::string hedge_rule;
  std::string position_attribution;
  bool strict_judge_json = false;
  std::string report_format;
  std::string dpo_base_model;
  std::vector<std::string> dpo_donor_models;
  std::string dpo_relation;
  std::string dpo_seeds;
  int dpo_generic_per_language = 0;
};

void apply_flags(const CLI::App& app, const Flags& f, RunConfig& cfg) {
  try {
    if (app.count("--bank")) cfg.bank = f.bank;
    if (app.count("--languages")) cfg.languages = f.languages;
    if (app.count("--settings")) {
      cfg.settings.clear();
      for (const auto& s : f.settings) {
        cfg.settings.push_back(refbench::dataset::setting_from_string(s));
      }
    }
    if (app.count("--kinds")) {
      cfg.kinds.clear();
      for (const auto& k : f.kinds) {
        cfg.kinds.push_back(refbench::dataset::kind_from_string(k));
      }
    }
    if (app.count("--cache-dir")) cfg.cache_dir = f.cache_dir;
    if (app.count("--output-dir")) cfg.output_dir = f.output_dir;
    if (app.count("--seed")) cfg.seed = f.seed;
    if (app.count("--concurrency")) cfg.concurrency = f.concurrency;
    if (app.count("--permutations")) cfg.permutations = f.permutations;
    if (app.count("--hedge-rule")) {
      cfg.hedge_rule = refbench::scoring::hedge_rule_from_string(f.hedge_rule);
    }
    if (app.count("--position-attribution")) {
      cfg.position_attribution =
          refbench::metrics::position_attribution_from_string(f.position_attribution);
    }
    if (app.count("--strict-judge-json")) cfg.strict_judge_json = f.strict_judge_json;
    if (app.count("--report-format")) {
      refbench::metrics::report_format_from_string(f.report_format);
      cfg.report_format = f.report_format;
    }
    if (app.count("--dpo-base-model")) cfg.dpo_base_model = f.dpo_base_model;
    if (app.count("--dpo-donor-models")) cfg.dpo_donor_models = f.dpo_donor_models;
    if (app.count("--dpo-relation")) cfg.dpo_relation = f.dpo_relation;
    if (app.count("--dpo-seeds")) cfg.dpo_seeds = f.dpo_seeds;
    if (app.count("--dpo-generic-per-language")) {
      cfg.dpo_generic_per_language = f.dpo_generic_per_language;
    }
  } catch (const refbench::DataError& e) {
    throw refbench::ConfigError(e.what());
  }
  if (cfg.permutations != "fixed" && cfg.permutations != "all") {
    throw refbench::ConfigError("'permutations' must be fixed|all");
  }
  if (cfg.concurrency < 1) throw refbench::ConfigError("'concurrency' must be >= 1");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Benchmark harness for referential ambiguity in multilingual dialogue"};
  app.set_version_flag("--version", std::string(refbench::kVersion));
  app.require_subcommand(1);

  std::string config_path;
  Flags f;
  app.add_option("--config", config_path, "JSON run configuration file");
  app.add_option("--bank", f.bank, "relation bank JSON");
  app.add_option("--languages", f.languages, "language codes (default: all bank languages)")
      ->delimiter(',');
  app.add_option("--settings", f.settings, "normal|simple|cot (default: normal,simple)")
      ->delimiter(',');
  app.add_option("--kinds", f.kinds, "clearref|sharedref (default: both)")->delimiter(',');
  app.add_option("--cache-dir", f.cache_dir, "response cache directory ('' disables caching)");
  app.add_option("--output-dir", f.output_dir, "output directory (default: out)");
  app.add_option("--seed", f.seed, "master seed (default: 0)");
  app.add_option("--concurrency", f.concurrency, "worker pool width (default: 4)");
  app.add_option("--permutations", f.permutations, "fixed|all entity presentation orders");
  app.add_option("--hedge-rule", f.hedge_rule, "literal|strict hedge correctness");
  app.add_option("--position-attribution", f.position_attribution,
                 "mass_split|single_mention position accounting");
  app.add_flag("--strict-judge-json", f.strict_judge_json,
               "require the judge output to be exactly one JSON object");
  app.add_option("--report-format", f.report_format, "csv|json|markdown");
  app.add_option("--dpo-base-model", f.dpo_base_model, "model whose failures become 'rejected'");
  app.add_option("--dpo-donor-models", f.dpo_donor_models,
                 "models donating 'chosen' responses (default: all others)")
      ->delimiter(',');
  app.add_option("--dpo-relation", f.dpo_relation, "restrict pairs to one relation, e.g. 'CapableOf fly'");
  app.add_option("--dpo-seeds", f.dpo_seeds, "generic clarification template JSON");
  app.add_option("--dpo-generic-per-language", f.dpo_generic_per_language,
                 "generic clarification pairs injected per language");

  auto* build = app.add_subcommand("build-dataset", "Synthesize instances from the relation bank");
  auto* run_eval = app.add_subcommand("run-eval", "Collect, judge and score model responses");
  auto* judge_cmd = app.add_subcommand("judge", "Judge collected responses");
  auto* score_cmd = app.add_subcommand("score", "Score judged responses");
  auto* report_cmd = app.add_subcommand("report", "Aggregate scored runs into a report");
  auto* validate = app.add_subcommand("validate-judge", "Compare verdicts against a human fixture");
  std::string fixture_path;
  std::string verdicts_path;
  validate->add_option("fixture", fixture_path, "human annotation TSV")->required();
  validate->add_option("verdicts", verdicts_path, "judge verdict JSONL")->required();
  auto* export_dpo = app.add_subcommand("export-dpo", "Export DPO preference pairs");
  auto* ablate =
      app.add_subcommand("ablate-permutations", "Re-run the pipeline over all entity orders");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;  // bad usage is a config-class failure
  }

  try {
    RunConfig cfg =
        config_path.empty() ? RunConfig{} : refbench::pipeline::load_run_config(config_path);
    apply_flags(app, f, cfg);

    if (build->parsed()) {
      refbench::pipeline::cmd_build_dataset(cfg);
    } else if (run_eval->parsed()) {
      refbench::pipeline::cmd_run_eval(cfg);
    } else if (judge_cmd->parsed()) {
      refbench::pipeline::cmd_judge(cfg);
    } else if (score_cmd->parsed()) {
      refbench::pipeline::cmd_score(cfg);
    } else if (report_cmd->parsed()) {
      refbench::pipeline::cmd_report(cfg);
    } else if (validate->parsed()) {
      refbench::pipeline::cmd_validate_judge(cfg, fixture_path, verdicts_path);
    } else if (export_dpo->parsed()) {
      refbench::pipeline::cmd_export_dpo(cfg);
    } else if (ablate->parsed()) {
      refbench::pipeline::cmd_ablate_permutations(cfg);
    }
    return 0;
  } catch (const refbench::ConfigError& e) {
    std::cerr << "config error: " << e.what() << std::endl;
    return 2;
  } catch (const refbench::JudgeParseError& e) {
    std::cerr << "judge-parse error: " << e.what() << std::endl;
    return 5;
  } catch (const refbench::ProviderError& e) {
    std::cerr << "provider error: " << e.what() << std::endl;
    return 4;
  } catch (const refbench::DataError& e) {
    std::cerr << "data error: " << e.what() << std::endl;
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
}
