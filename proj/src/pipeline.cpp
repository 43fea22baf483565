#include "refbench/pipeline.hpp"

#include <algorithm>
#include <ctime>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <tuple>
#include <utility>

#include "refbench/dpo.hpp"
#include "refbench/error.hpp"
#include "refbench/jsonl.hpp"
#include "refbench/judge.hpp"
#include "refbench/parallel.hpp"
#include "refbench/text.hpp"
#include "refbench/version.hpp"

namespace refbench::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw ConfigError(msg);
}

fs::path resolve_against(const fs::path& base, const fs::path& p) {
  if (p.empty() || p.is_absolute()) return p;
  return base / p;
}

// mock:// script paths in a config file are relative to the file, like every
// other path in it.
void resolve_mock_endpoint(provider::ModelConfig& m, const fs::path& base) {
  if (!provider::is_mock_endpoint(m.endpoint)) return;
  fs::path script = m.endpoint.substr(7);
  if (!script.is_absolute()) m.endpoint = "mock://" + (base / script).string();
}

bool is_live(const provider::ModelConfig& m) {
  return !m.endpoint.empty() && !provider::is_mock_endpoint(m.endpoint);
}

// A stage counts as live only when a provider it actually calls is non-mock.
// Offline stages use a zero clock, so reruns are byte-identical.
bool stage_is_live(std::initializer_list<const provider::ModelConfig*> used) {
  for (const auto* m : used) {
    if (m != nullptr && is_live(*m)) return true;
  }
  return false;
}

provider::ClockHooks clock_for(bool live) {
  if (live) return provider::ClockHooks::real();
  return provider::ClockHooks::simulated(std::make_shared<long long>(0));
}

json manifest_base(const RunConfig& cfg, const std::string& stage, bool live) {
  json m;
  m["stage"] = stage;
  m["tool_version"] = std::string(kVersion);
  m["seed"] = cfg.seed;
  m["bank"] = cfg.bank.string();
  m["generated_at"] = live ? static_cast<long long>(std::time(nullptr)) : 0LL;
  return m;
}

std::vector<std::string> resolved_languages(const RunConfig& cfg, const kb::RelationBank& bank) {
  if (cfg.languages.empty()) return bank.languages;
  for (const auto& lang : cfg.languages) {
    if (std::find(bank.languages.begin(), bank.languages.end(), lang) == bank.languages.end()) {
      throw ConfigError("language '" + lang + "' is not provided by the bank");
    }
  }
  return cfg.languages;
}

const provider::ModelConfig* find_model(const RunConfig& cfg, const std::string& name) {
  for (const auto& m : cfg.models) {
    if (m.name == name) return &m;
  }
  return nullptr;
}

std::vector<std::string> setting_names(const RunConfig& cfg) {
  std::vector<std::string> out;
  for (auto s : cfg.settings) out.push_back(dataset::to_string(s));
  return out;
}

std::vector<std::string> model_names(const RunConfig& cfg) {
  std::vector<std::string> out;
  for (const auto& m : cfg.models) out.push_back(m.name);
  return out;
}

kb::RelationBank load_bank(const RunConfig& cfg) {
  require(!cfg.bank.empty(), "config must set 'bank'");
  return kb::load_relation_bank(cfg.bank);
}

std::vector<dataset::Instance> load_built_instances(const RunConfig& cfg,
                                                    const kb::RelationBank& bank) {
  const fs::path dir = cfg.output_dir / "instances";
  std::vector<dataset::Instance> all;
  for (auto kind : cfg.kinds) {
    fs::path file = dir / (dataset::to_string(kind) + ".jsonl");
    if (!fs::exists(file)) {
      throw DataError("missing instance file " + file.string() + "; run build-dataset first");
    }
    auto part = dataset::read_instances(file, &bank);
    all.insert(all.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }
  if (all.empty()) throw DataError("no instances under " + dir.string());
  return all;
}

kb::RelationId parse_relation_label(const std::string& label) {
  auto space = label.find(' ');
  if (space == std::string::npos || space == 0 || space + 1 >= label.size()) {
    throw ConfigError("relation filter '" + label + "' must look like 'CapableOf fly'");
  }
  try {
    return kb::RelationId{kb::predicate_from_string(label.substr(0, space)),
                          label.substr(space + 1)};
  } catch (const DataError& e) {
    throw ConfigError(std::string("relation filter: ") + e.what());
  }
}

void check_keys(const json& j, std::initializer_list<const char*> allowed,
                const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : allowed) {
      if (it.key() == k) {
        known = true;
        break;
      }
    }
    if (!known) throw ConfigError(where + ": unknown key '" + it.key() + "'");
  }
}

std::string truncate_for_log(const std::string& s, std::size_t limit = 200) {
  if (s.size() <= limit) return s;
  return s.substr(0, limit) + "...";
}

// Collects the candidate models' raw responses; the first stage of run-eval.
void collect_responses(const RunConfig& cfg) {
  require(!cfg.models.empty(), "run-eval: config must list at least one model");
  kb::RelationBank bank = load_bank(cfg);
  const auto languages = resolved_languages(cfg, bank);
  require(!cfg.settings.empty(), "run-eval: config must list at least one setting");
  const auto instances = load_built_instances(cfg, bank);

  struct Item {
    const dataset::Instance* inst;
    const std::string* language;
    dataset::Setting setting;
  };
  std::vector<Item> items;
  items.reserve(instances.size() * languages.size() * cfg.settings.size());
  for (const auto& inst : instances) {
    for (const auto& lang : languages) {
      for (auto setting : cfg.settings) items.push_back({&inst, &lang, setting});
    }
  }

  std::vector<const provider::ModelConfig*> used;
  for (const auto& m : cfg.models) used.push_back(&m);
  bool live = false;
  for (const auto* m : used) live = live || is_live(*m);
  auto hooks = clock_for(live);

  const fs::path dir = cfg.output_dir / "responses";
  json diagnostics = json::object();
  for (const auto& model_cfg : cfg.models) {
    auto prov = provider::make_provider(model_cfg, cfg.cache_dir, hooks);
    struct Slot {
      json row;
      bool ok = false;
      bool empty_body = false;
      bool provider_error = false;
      std::string error;
    };
    std::vector<Slot> slots(items.size());
    parallel_for(items.size(), cfg.concurrency, [&](std::size_t i) {
      const Item& it = items[i];
      Slot& s = slots[i];
      try {
        auto conv = dataset::assemble_conversation(*it.inst, bank, *it.language, it.setting);
        auto resp = prov->complete(dataset::conversation_messages(conv));
        s.row = json{{"instance_id", it.inst->id},
                     {"language", *it.language},
                     {"setting", dataset::to_string(it.setting)},
                     {"model", model_cfg.name},
                     {"response_text", resp.text},
                     {"fingerprint", resp.fingerprint},
                     {"timestamp", resp.timestamp}};
        s.ok = true;
        s.empty_body = resp.empty_body;
      } catch (const ProviderError& e) {
        s.error = e.what();
        s.provider_error = true;
      } catch (const std::exception& e) {
        s.error = e.what();
      }
    });

    std::vector<json> rows;
    json failures = json::array();
    long long empty_bodies = 0;
    bool any_provider_error = false;
    for (std::size_t i = 0; i < slots.size(); ++i) {
      Slot& s = slots[i];
      if (s.ok) {
        rows.push_back(std::move(s.row));
        if (s.empty_body) ++empty_bodies;
        continue;
      }
      any_provider_error = any_provider_error || s.provider_error;
      failures.push_back(json{{"instance_id", items[i].inst->id},
                              {"language", *items[i].language},
                              {"setting", dataset::to_string(items[i].setting)},
                              {"error", s.error}});
    }
    if (rows.empty() && !failures.empty() && any_provider_error) {
      throw ProviderError("model '" + model_cfg.name + "': all " +
                              std::to_string(items.size()) + " requests failed; first error: " +
                              failures.front().at("error").get<std::string>(),
                          false);
    }
    std::sort(rows.begin(), rows.end(), [](const json& a, const json& b) {
      return std::make_tuple(a.at("instance_id").get<std::string>(),
                             a.at("language").get<std::string>(),
                             a.at("setting").get<std::string>()) <
             std::make_tuple(b.at("instance_id").get<std::string>(),
                             b.at("language").get<std::string>(),
                             b.at("setting").get<std::string>());
    });
    jsonl::write_file(dir / (model_cfg.name + ".jsonl"), rows);

    json d;
    d["completed"] = rows.size();
    d["failed"] = failures.size();
    d["empty_responses"] = empty_bodies;
    d["failures"] = failures;
    if (auto* caching = dynamic_cast<provider::CachingProvider*>(prov.get())) {
      d["cache_hits"] = caching->hits();
      d["cache_misses"] = caching->misses();
    }
    diagnostics[model_cfg.name] = d;
    std::cout << "run-eval: " << model_cfg.name << ": " << rows.size() << "/" << items.size()
              << " responses" << std::endl;
  }
  jsonl::write_json_file(dir / "diagnostics.json", diagnostics);

  json m = manifest_base(cfg, "run-eval", live);
  m["models"] = model_names(cfg);
  m["languages"] = languages;
  m["settings"] = setting_names(cfg);
  m["items_per_model"] = items.size();
  jsonl::write_json_file(dir / "manifest.json", m);
}

}  // namespace

bool RunConfig::all_mock() const {
  for (const auto& m : models) {
    if (is_live(m)) return false;
  }
  if (is_live(judge)) return false;
  if (verifier && is_live(*verifier)) return false;
  return true;
}

provider::ModelConfig model_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("model config must be a JSON object");
  check_keys(j,
             {"name", "endpoint", "api_model", "auth_env", "temperature", "top_p", "max_tokens",
              "max_retries", "rate_limit_per_min"},
             "model config");
  provider::ModelConfig m;
  try {
    m.name = j.at("name").get<std::string>();
    m.endpoint = j.at("endpoint").get<std::string>();
    m.api_model = j.value("api_model", m.name);
    m.auth_env = j.value("auth_env", std::string());
    m.sampling.temperature = j.value("temperature", 0.0);
    m.sampling.top_p = j.value("top_p", 1.0);
    m.sampling.max_tokens = j.value("max_tokens", 0);
    m.max_retries = j.value("max_retries", 3);
    m.rate_limit_per_min = j.value("rate_limit_per_min", 60);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
  require(!m.name.empty(), "model config: 'name' must be nonempty");
  // Names become output file names (responses/<name>.jsonl etc.).
  require(m.name.find('/') == std::string::npos && m.name.find('\\') == std::string::npos &&
              m.name.find("..") == std::string::npos,
          "model name '" + m.name + "' must be usable as a file name");
  require(!m.endpoint.empty(), "model '" + m.name + "': 'endpoint' must be nonempty");
  require(m.max_retries >= 0, "model '" + m.name + "': max_retries must be >= 0");
  require(m.rate_limit_per_min > 0, "model '" + m.name + "': rate_limit_per_min must be > 0");
  return m;
}

RunConfig load_run_config(const fs::path& path) {
  if (!fs::exists(path)) throw ConfigError("config file not found: " + path.string());
  json j;
  try {
    j = jsonl::parse_file(path);
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
  if (!j.is_object()) throw ConfigError(path.string() + ": config root must be a JSON object");
  check_keys(j,
             {"bank", "languages", "settings", "kinds", "models", "judge", "verifier", "cache_dir",
              "output_dir", "seed", "concurrency", "permutations", "hedge_rule",
              "position_attribution", "strict_judge_json", "report_format", "dpo"},
             "config");

  RunConfig cfg;
  const fs::path base = fs::absolute(path).parent_path();
  try {
    if (j.contains("bank")) cfg.bank = resolve_against(base, j.at("bank").get<std::string>());
    if (j.contains("languages")) cfg.languages = j.at("languages").get<std::vector<std::string>>();
    if (j.contains("settings")) {
      cfg.settings.clear();
      for (const auto& s : j.at("settings")) {
        cfg.settings.push_back(dataset::setting_from_string(s.get<std::string>()));
      }
    }
    if (j.contains("kinds")) {
      cfg.kinds.clear();
      for (const auto& k : j.at("kinds")) {
        cfg.kinds.push_back(dataset::kind_from_string(k.get<std::string>()));
      }
    }
    if (j.contains("models")) {
      for (const auto& m : j.at("models")) cfg.models.push_back(model_config_from_json(m));
    }
    if (j.contains("judge")) cfg.judge = model_config_from_json(j.at("judge"));
    if (j.contains("verifier")) cfg.verifier = model_config_from_json(j.at("verifier"));
    if (j.contains("cache_dir")) {
      cfg.cache_dir = resolve_against(base, j.at("cache_dir").get<std::string>());
    }
    if (j.contains("output_dir")) {
      cfg.output_dir = resolve_against(base, j.at("output_dir").get<std::string>());
    }
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("concurrency")) cfg.concurrency = j.at("concurrency").get<int>();
    if (j.contains("permutations")) cfg.permutations = j.at("permutations").get<std::string>();
    if (j.contains("hedge_rule")) {
      cfg.hedge_rule = scoring::hedge_rule_from_string(j.at("hedge_rule").get<std::string>());
    }
    if (j.contains("position_attribution")) {
      cfg.position_attribution =
          metrics::position_attribution_from_string(j.at("position_attribution").get<std::string>());
    }
    if (j.contains("strict_judge_json")) {
      cfg.strict_judge_json = j.at("strict_judge_json").get<bool>();
    }
    if (j.contains("report_format")) {
      cfg.report_format = j.at("report_format").get<std::string>();
      metrics::report_format_from_string(cfg.report_format);  // validate eagerly
    }
    if (j.contains("dpo")) {
      const json& d = j.at("dpo");
      if (!d.is_object()) throw ConfigError("config: 'dpo' must be an object");
      check_keys(d, {"base_model", "donor_models", "relation", "seeds", "generic_per_language"},
                 "config.dpo");
      if (d.contains("base_model")) cfg.dpo_base_model = d.at("base_model").get<std::string>();
      if (d.contains("donor_models")) {
        cfg.dpo_donor_models = d.at("donor_models").get<std::vector<std::string>>();
      }
      if (d.contains("relation")) {
        cfg.dpo_relation = d.at("relation").get<std::string>();
        parse_relation_label(*cfg.dpo_relation);  // validate eagerly
      }
      if (d.contains("seeds")) cfg.dpo_seeds = resolve_against(base, d.at("seeds").get<std::string>());
      if (d.contains("generic_per_language")) {
        cfg.dpo_generic_per_language = d.at("generic_per_language").get<int>();
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  } catch (const DataError& e) {
    // enum parse failures in a config file are config errors
    throw ConfigError(path.string() + ": " + e.what());
  }

  resolve_mock_endpoint(cfg.judge, base);
  if (cfg.verifier) resolve_mock_endpoint(*cfg.verifier, base);
  for (auto& m : cfg.models) resolve_mock_endpoint(m, base);

  require(cfg.permutations == "fixed" || cfg.permutations == "all",
          "config: 'permutations' must be fixed|all");
  require(cfg.concurrency >= 1, "config: 'concurrency' must be >= 1");
  require(cfg.dpo_generic_per_language >= 0, "config: dpo.generic_per_language must be >= 0");
  std::set<std::string> names;
  for (const auto& m : cfg.models) {
    if (!names.insert(m.name).second) {
      throw ConfigError("config: duplicate model name '" + m.name + "'");
    }
  }
  return cfg;
}

void cmd_build_dataset(const RunConfig& cfg) {
  kb::RelationBank bank = load_bank(cfg);
  (void)resolved_languages(cfg, bank);  // fail fast on unknown languages
  require(!cfg.kinds.empty(), "build-dataset: config must list at least one dataset kind");

  const bool live = stage_is_live({cfg.verifier ? &*cfg.verifier : nullptr});
  std::map<dataset::InstanceKind, std::vector<dataset::Instance>> built;
  for (auto kind : cfg.kinds) {
    built[kind] = kind == dataset::InstanceKind::ClearRef ? dataset::build_clearref(bank, cfg.seed)
                                                          : dataset::build_sharedref(bank, cfg.seed);
  }

  std::vector<dataset::ExclusionRecord> exclusions;
  if (cfg.verifier) {
    auto verifier = provider::make_provider(*cfg.verifier, cfg.cache_dir, clock_for(live));
    for (auto& [kind, list] : built) {
      auto outcome = dataset::verify_instances(std::move(list), bank, *verifier, cfg.seed);
      list = std::move(outcome.kept);
      exclusions.insert(exclusions.end(), std::make_move_iterator(outcome.excluded.begin()),
                        std::make_move_iterator(outcome.excluded.end()));
    }
  }

  if (cfg.permutations == "all") {
    for (auto& [kind, list] : built) {
      std::vector<dataset::Instance> expanded;
      for (const auto& inst : list) {
        auto perms = dataset::permutations_of(inst);
        expanded.insert(expanded.end(), std::make_move_iterator(perms.begin()),
                        std::make_move_iterator(perms.end()));
      }
      list = std::move(expanded);
    }
  }

  const fs::path dir = cfg.output_dir / "instances";
  json counts = json::object();
  for (const auto& [kind, list] : built) {
    dataset::write_instances(list, dir / (dataset::to_string(kind) + ".jsonl"));
    counts[dataset::to_string(kind)] = list.size();
  }
  std::vector<json> exclusion_rows;
  for (const auto& e : exclusions) {
    exclusion_rows.push_back(
        json{{"instance_id", e.instance_id}, {"reason", e.reason}, {"attempts", e.attempts}});
  }
  jsonl::write_file(dir / "exclusions.jsonl", exclusion_rows);

  json m = manifest_base(cfg, "build-dataset", live);
  m["counts"] = counts;
  m["excluded"] = exclusions.size();
  m["permutations"] = cfg.permutations;
  m["verified"] = cfg.verifier.has_value();
  jsonl::write_json_file(dir / "manifest.json", m);

  std::cout << "build-dataset: " << counts.dump() << ", excluded " << exclusions.size()
            << std::endl;
}

void cmd_run_eval(const RunConfig& cfg) {
  collect_responses(cfg);
  cmd_judge(cfg);
  cmd_score(cfg);
}

void cmd_judge(const RunConfig& cfg) {
  require(!cfg.judge.endpoint.empty(), "judge: config must set 'judge'");
  require(!cfg.models.empty(), "judge: config must list at least one model");
  kb::RelationBank bank = load_bank(cfg);
  const auto instances = load_built_instances(cfg, bank);
  std::map<std::string, const dataset::Instance*> by_id;
  for (const auto& inst : instances) by_id[inst.id] = &inst;

  const bool live = stage_is_live({&cfg.judge});
  auto judge_provider = provider::make_provider(cfg.judge, cfg.cache_dir, clock_for(live));

  const fs::path rdir = cfg.output_dir / "responses";
  const fs::path vdir = cfg.output_dir / "verdicts";
  json diagnostics = json::object();
  for (const auto& model_cfg : cfg.models) {
    const fs::path rfile = rdir / (model_cfg.name + ".jsonl");
    if (!fs::exists(rfile)) {
      throw DataError("judge: missing response file " + rfile.string() + "; run run-eval first");
    }
    const auto rows = jsonl::read_file(rfile);

    struct Slot {
      std::optional<judge::JudgeVerdict> verdict;
      std::vector<std::string> dropped;
      std::string error;
      std::string error_kind;
      std::string raw_head;
    };
    std::vector<Slot> slots(rows.size());
    parallel_for(rows.size(), cfg.concurrency, [&](std::size_t i) {
      Slot& s = slots[i];
      try {
        const json& r = rows[i];
        const auto id = r.at("instance_id").get<std::string>();
        const auto language = r.at("language").get<std::string>();
        const auto setting = dataset::setting_from_string(r.at("setting").get<std::string>());
        const auto answer = r.at("response_text").get<std::string>();
        auto found = by_id.find(id);
        if (found == by_id.end()) {
          throw DataError("response references unknown instance '" + id + "'");
        }
        const dataset::Instance& inst = *found->second;

        auto conv = dataset::assemble_conversation(inst, bank, language, setting);
        auto cls = judge::classify_response(*judge_provider, conv.question(), answer,
                                            cfg.strict_judge_json);
        judge::JudgeVerdict v;
        v.instance_id = id;
        v.model = r.at("model").get<std::string>();
        v.language = language;
        v.setting = setting;
        v.category = cls.category;
        v.judge_model = cfg.judge.name;
        v.raw_class_output = cls.raw;
        if (!text::trim(answer).empty()) {
          const auto names = dataset::presentation_names(inst, bank, language);
          auto ext = judge::extract_entities(*judge_provider, names, answer);
          const auto canonicals = inst.presented();
          std::set<std::string> mentions;
          for (const auto& matched : ext.matched) {
            for (std::size_t k = 0; k < names.size(); ++k) {
              if (names[k] == matched) {
                mentions.insert(canonicals[k]);
                break;
              }
            }
          }
          v.mentions.assign(mentions.begin(), mentions.end());
          v.raw_extract_output = ext.raw;
          s.dropped = std::move(ext.dropped);
        }
        s.verdict = std::move(v);
      } catch (const JudgeParseError& e) {
        s.error = e.what();
        s.error_kind = "judge_parse";
        s.raw_head = truncate_for_log(e.raw());
      } catch (const ProviderError& e) {
        s.error = e.what();
        s.error_kind = "provider";
      } catch (const std::exception& e) {
        s.error = e.what();
        s.error_kind = "data";
      }
    });

    std::vector<judge::JudgeVerdict> verdicts;
    json failures = json::array();
    json dropped_mentions = json::array();
    bool any_provider_error = false;
    for (std::size_t i = 0; i < slots.size(); ++i) {
      Slot& s = slots[i];
      if (s.verdict) {
        for (const auto& name : s.dropped) {
          dropped_mentions.push_back(
              json{{"instance_id", s.verdict->instance_id}, {"name", name}});
        }
        verdicts.push_back(std::move(*s.verdict));
        continue;
      }
      any_provider_error = any_provider_error || s.error_kind == "provider";
      json f{{"instance_id", rows[i].value("instance_id", std::string())},
             {"language", rows[i].value("language", std::string())},
             {"setting", rows[i].value("setting", std::string())},
             {"kind", s.error_kind},
             {"error", s.error}};
      if (!s.raw_head.empty()) f["raw_head"] = s.raw_head;
      failures.push_back(std::move(f));
    }
    if (verdicts.empty() && !failures.empty() && any_provider_error) {
      throw ProviderError("judge '" + cfg.judge.name + "': all " + std::to_string(rows.size()) +
                              " calls failed for model '" + model_cfg.name + "'",
                          false);
    }
    judge::write_verdicts(verdicts, vdir / (model_cfg.name + ".jsonl"));

    json d;
    d["judged"] = verdicts.size();
    d["failed"] = failures.size();
    d["failures"] = failures;
    d["dropped_mentions"] = dropped_mentions;
    diagnostics[model_cfg.name] = d;
    std::cout << "judge: " << model_cfg.name << ": " << verdicts.size() << "/" << rows.size()
              << " verdicts" << std::endl;
  }
  jsonl::write_json_file(vdir / "diagnostics.json", diagnostics);

  json m = manifest_base(cfg, "judge", live);
  m["judge_model"] = cfg.judge.name;
  m["models"] = model_names(cfg);
  m["strict_judge_json"] = cfg.strict_judge_json;
  jsonl::write_json_file(vdir / "manifest.json", m);
}

void cmd_score(const RunConfig& cfg) {
  require(!cfg.models.empty(), "score: config must list at least one model");
  kb::RelationBank bank = load_bank(cfg);
  const auto instances = load_built_instances(cfg, bank);
  std::map<std::string, const dataset::Instance*> by_id;
  for (const auto& inst : instances) by_id[inst.id] = &inst;

  const fs::path vdir = cfg.output_dir / "verdicts";
  const fs::path sdir = cfg.output_dir / "scored";
  json counts = json::object();
  for (const auto& model_cfg : cfg.models) {
    const fs::path vfile = vdir / (model_cfg.name + ".jsonl");
    if (!fs::exists(vfile)) {
      throw DataError("score: missing verdict file " + vfile.string() + "; run judge first");
    }
    const auto verdicts = judge::read_verdicts(vfile);

    // score_batch joins 1:1 on instance id, so rows are grouped per
    // (language, setting) where each instance appears at most once.
    std::map<std::pair<std::string, std::string>, std::vector<judge::JudgeVerdict>> groups;
    for (const auto& v : verdicts) {
      groups[{v.language, dataset::to_string(v.setting)}].push_back(v);
    }
    std::vector<scoring::ScoredResponse> scored;
    for (const auto& [key, group] : groups) {
      std::vector<dataset::Instance> insts;
      insts.reserve(group.size());
      for (const auto& v : group) {
        auto found = by_id.find(v.instance_id);
        if (found == by_id.end()) {
          throw DataError("score: verdict references unknown instance '" + v.instance_id + "'");
        }
        insts.push_back(*found->second);
      }
      auto part = scoring::score_batch(insts, group, cfg.hedge_rule);
      scored.insert(scored.end(), std::make_move_iterator(part.begin()),
                    std::make_move_iterator(part.end()));
    }
    std::sort(scored.begin(), scored.end(),
              [](const scoring::ScoredResponse& a, const scoring::ScoredResponse& b) {
                return std::make_tuple(a.instance_id, a.language, dataset::to_string(a.setting)) <
                       std::make_tuple(b.instance_id, b.language, dataset::to_string(b.setting));
              });
    scoring::write_scored(scored, sdir / (model_cfg.name + ".jsonl"));
    counts[model_cfg.name] = scored.size();
  }

  json m = manifest_base(cfg, "score", false);
  m["counts"] = counts;
  m["hedge_rule"] = scoring::to_string(cfg.hedge_rule);
  jsonl::write_json_file(sdir / "manifest.json", m);
  std::cout << "score: " << counts.dump() << std::endl;
}

void cmd_report(const RunConfig& cfg) {
  require(!cfg.models.empty(), "report: config must list at least one model");
  kb::RelationBank bank = load_bank(cfg);
  const auto instances = load_built_instances(cfg, bank);

  const fs::path sdir = cfg.output_dir / "scored";
  std::vector<scoring::ScoredResponse> all;
  std::vector<std::string> included;
  for (const auto& model_cfg : cfg.models) {
    const fs::path file = sdir / (model_cfg.name + ".jsonl");
    if (!fs::exists(file)) {
      std::cerr << "report: no scored file for model '" << model_cfg.name << "', skipping"
                << std::endl;
      continue;
    }
    auto part = scoring::read_scored(file);
    all.insert(all.end(), std::make_move_iterator(part.begin()),
               std::make_move_iterator(part.end()));
    included.push_back(model_cfg.name);
  }
  if (all.empty()) {
    throw DataError("report: no scored responses under " + sdir.string() + "; run score first");
  }

  const auto cells = metrics::aggregate(all, metrics::GroupBy{});
  const auto positions = metrics::position_selection_rates(all, instances, cfg.position_attribution);
  const auto format = metrics::report_format_from_string(cfg.report_format);
  const std::string document = metrics::render_report(cells, positions, format);

  const fs::path rdir = cfg.output_dir / "reports";
  const std::string ext = format == metrics::ReportFormat::Csv    ? "csv"
                          : format == metrics::ReportFormat::Json ? "json"
                                                                  : "md";
  const fs::path report_path = rdir / ("report." + ext);
  jsonl::write_text_file(report_path, document);

  json rollup = json::object();
  for (const char* stage : {"responses", "verdicts"}) {
    const fs::path df = cfg.output_dir / stage / "diagnostics.json";
    if (fs::exists(df)) rollup[stage] = jsonl::parse_file(df);
  }
  jsonl::write_json_file(rdir / "diagnostics.json", rollup);

  json m = manifest_base(cfg, "report", false);
  m["models"] = included;
  m["format"] = cfg.report_format;
  m["rows"] = all.size();
  m["cells"] = cells.size();
  m["position_attribution"] = cfg.position_attribution == metrics::PositionAttribution::MassSplit
                                  ? "mass_split"
                                  : "single_mention";
  jsonl::write_json_file(rdir / "manifest.json", m);
  std::cout << "report: wrote " << report_path.string() << std::endl;
}

void cmd_validate_judge(const RunConfig& cfg, const fs::path& human_fixture,
                        const fs::path& verdicts_file) {
  const auto fixture = judge::load_human_fixture(human_fixture);
  const auto verdicts = judge::read_verdicts(verdicts_file);
  const auto report = judge::validate_against_human(fixture, verdicts);

  const fs::path adir = cfg.output_dir / "agreement";
  jsonl::write_json_file(adir / "agreement.json", judge::agreement_to_json(report));
  json m = manifest_base(cfg, "validate-judge", false);
  m["fixture"] = human_fixture.string();
  m["verdicts"] = verdicts_file.string();
  m["n"] = report.n;
  jsonl::write_json_file(adir / "manifest.json", m);

  std::ostringstream out;
  out << "n: " << report.n << "\n"
      << std::fixed << std::setprecision(4)  //
      << "category_accuracy: " << report.category_accuracy << "\n"
      << "cohen_kappa: " << report.kappa << "\n"
      << "entity_exact_match: " << report.entity_exact_match << "\n";
  std::cout << out.str();
}

void cmd_export_dpo(const RunConfig& cfg) {
  require(!cfg.dpo_base_model.empty(), "export-dpo: config must set dpo.base_model");
  require(find_model(cfg, cfg.dpo_base_model) != nullptr,
          "export-dpo: dpo.base_model '" + cfg.dpo_base_model + "' is not a configured model");
  std::vector<std::string> donors = cfg.dpo_donor_models;
  if (donors.empty()) {
    for (const auto& m : cfg.models) {
      if (m.name != cfg.dpo_base_model) donors.push_back(m.name);
    }
  }
  require(!donors.empty(),
          "export-dpo: no donor models; configure dpo.donor_models or add more models");
  for (const auto& d : donors) {
    require(find_model(cfg, d) != nullptr, "export-dpo: donor '" + d + "' is not a configured model");
    require(d != cfg.dpo_base_model, "export-dpo: the base model cannot donate to itself");
  }

  kb::RelationBank bank = load_bank(cfg);
  const auto instances = load_built_instances(cfg, bank);

  auto load_records = [&](const std::string& name) {
    auto scored = scoring::read_scored(cfg.output_dir / "scored" / (name + ".jsonl"));
    auto rows = jsonl::read_file(cfg.output_dir / "responses" / (name + ".jsonl"));
    std::map<std::tuple<std::string, std::string, std::string>, std::string> text_by_key;
    for (const auto& r : rows) {
      text_by_key[{r.at("instance_id").get<std::string>(), r.at("language").get<std::string>(),
                   r.at("setting").get<std::string>()}] = r.at("response_text").get<std::string>();
    }
    std::vector<dpo::RunRecord> records;
    records.reserve(scored.size());
    for (auto& s : scored) {
      auto found = text_by_key.find({s.instance_id, s.language, dataset::to_string(s.setting)});
      if (found == text_by_key.end()) {
        throw DataError("export-dpo: no response text for " + s.instance_id + " (" + s.language +
                        ", " + dataset::to_string(s.setting) + ") of model '" + name + "'");
      }
      records.push_back(dpo::RunRecord{std::move(s), found->second});
    }
    return records;
  };

  const auto base_run = load_records(cfg.dpo_base_model);
  std::vector<dpo::RunRecord> donor_runs;
  for (const auto& d : donors) {
    auto part = load_records(d);
    donor_runs.insert(donor_runs.end(), std::make_move_iterator(part.begin()),
                      std::make_move_iterator(part.end()));
  }

  std::optional<kb::RelationId> filter;
  if (cfg.dpo_relation) filter = parse_relation_label(*cfg.dpo_relation);

  auto pairs = dpo::build_preference_pairs(bank, instances, base_run, donor_runs, filter, cfg.seed);
  const std::size_t from_runs = pairs.size();
  if (from_runs == 0) {
    std::cerr << "export-dpo: no preference pairs produced from model runs" << std::endl;
  }
  std::size_t generic = 0;
  if (cfg.dpo_generic_per_language > 0) {
    require(!cfg.dpo_seeds.empty(),
            "export-dpo: dpo.generic_per_language is set but dpo.seeds is missing");
    const auto templates = jsonl::parse_file(cfg.dpo_seeds);
    auto seeded = dpo::inject_generic_clarifications(templates, resolved_languages(cfg, bank),
                                                    cfg.dpo_generic_per_language);
    generic = seeded.size();
    pairs.insert(pairs.end(), std::make_move_iterator(seeded.begin()),
                 std::make_move_iterator(seeded.end()));
  }

  const fs::path ddir = cfg.output_dir / "dpo";
  dpo::export_pairs(std::move(pairs), ddir / "pairs.jsonl");

  json m = manifest_base(cfg, "export-dpo", false);
  m["total"] = from_runs + generic;
  m["from_runs"] = from_runs;
  m["generic"] = generic;
  m["base_model"] = cfg.dpo_base_model;
  m["donor_models"] = donors;
  m["relation"] = cfg.dpo_relation ? json(*cfg.dpo_relation) : json();
  jsonl::write_json_file(ddir / "manifest.json", m);
  std::cout << "export-dpo: " << (from_runs + generic) << " pairs (" << from_runs
            << " from runs, " << generic << " generic)" << std::endl;
}

void cmd_ablate_permutations(const RunConfig& cfg) {
  RunConfig ablation = cfg;
  ablation.permutations = "all";
  ablation.output_dir = cfg.output_dir / "ablation";
  cmd_build_dataset(ablation);
  cmd_run_eval(ablation);
  cmd_report(ablation);
}

}  // namespace refbench::pipeline
