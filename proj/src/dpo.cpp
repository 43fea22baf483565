#include "refbench/dpo.hpp"

#include <algorithm>
#include <map>
#include <tuple>

#include "refbench/error.hpp"
#include "refbench/jsonl.hpp"
#include "refbench/random.hpp"

namespace refbench::dpo {

namespace {

using RunKey = std::tuple<std::string, std::string, std::string>;  // instance, language, setting

RunKey key_of(const scoring::ScoredResponse& s) {
  return {s.instance_id, s.language, dataset::to_string(s.setting)};
}

}  // namespace

std::vector<PreferencePair> build_preference_pairs(
    const kb::RelationBank& bank, const std::vector<dataset::Instance>& instances,
    const std::vector<RunRecord>& base_run, const std::vector<RunRecord>& donor_runs,
    const std::optional<kb::RelationId>& relation_filter, std::uint64_t seed) {
  std::map<std::string, const dataset::Instance*> by_id;
  for (const auto& inst : instances) by_id[inst.id] = &inst;

  std::map<RunKey, const RunRecord*> base;
  for (const auto& r : base_run) {
    if (!base.emplace(key_of(r.scored), &r).second) {
      throw DataError("dpo: duplicate base record for instance '" + r.scored.instance_id + "'");
    }
  }
  // Only direct donor responses can be chosen; keep them sorted by model name
  // so donor selection is order-independent of the input file.
  std::map<RunKey, std::vector<const RunRecord*>> donors;
  for (const auto& r : donor_runs) {
    if (r.scored.direct) donors[key_of(r.scored)].push_back(&r);
  }
  for (auto& [key, list] : donors) {
    std::sort(list.begin(), list.end(), [](const RunRecord* a, const RunRecord* b) {
      return a->scored.model < b->scored.model;
    });
  }

  rnd::SeededRng rng(seed);
  std::vector<PreferencePair> pairs;
  for (const auto& [key, base_rec] : base) {
    auto inst_it = by_id.find(base_rec->scored.instance_id);
    if (inst_it == by_id.end()) {
      throw DataError("dpo: no instance for scored id '" + base_rec->scored.instance_id + "'");
    }
    const dataset::Instance& inst = *inst_it->second;
    if (relation_filter && !(inst.relation == *relation_filter)) continue;
    if (base_rec->scored.correct) continue;

    auto donor_it = donors.find(key);
    if (donor_it == donors.end() || donor_it->second.empty()) continue;
    const auto& candidates = donor_it->second;
    const RunRecord& donor = *candidates[rng.bounded(candidates.size())];
    if (donor.scored.model == base_rec->scored.model) {
      throw DataError("dpo: donor and base share model '" + donor.scored.model + "'");
    }

    // Re-randomize the entity order and rebuild the conversation to match.
    dataset::Instance permuted = inst;
    for (std::size_t i = permuted.order.size(); i > 1; --i) {
      std::swap(permuted.order[i - 1], permuted.order[rng.bounded(i)]);
    }
    permuted.id = dataset::make_instance_id(permuted.kind, permuted.relation, permuted.positives,
                                            permuted.negative, permuted.order);
    auto conversation = dataset::assemble_conversation(
        permuted, bank, base_rec->scored.language, base_rec->scored.setting);

    PreferencePair pair;
    pair.prompt = dataset::conversation_messages(conversation);
    pair.chosen = donor.response_text;
    pair.rejected = base_rec->response_text;
    pair.language = base_rec->scored.language;
    pair.setting = base_rec->scored.setting;
    pair.relation = inst.relation.str();
    pair.instance_id = inst.id;
    pair.chosen_model = donor.scored.model;
    pair.rejected_model = base_rec->scored.model;
    pair.chosen_category = donor.scored.category;
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

std::vector<PreferencePair> inject_generic_clarifications(const nlohmann::json& templates,
                                                          const std::vector<std::string>& languages,
                                                          int n_per_language) {
  if (n_per_language < 0) throw ConfigError("dpo: n_per_language must be >= 0");
  std::vector<PreferencePair> pairs;
  for (const auto& lang : languages) {
    if (!templates.contains(lang) || !templates[lang].is_array()) {
      throw DataError("dpo: no generic clarification templates for language '" + lang + "'");
    }
    const auto& rows = templates[lang];
    if (static_cast<int>(rows.size()) < n_per_language) {
      throw DataError("dpo: language '" + lang + "' has only " + std::to_string(rows.size()) +
                      " templates, need " + std::to_string(n_per_language));
    }
    for (int i = 0; i < n_per_language; ++i) {
      const auto& row = rows[static_cast<std::size_t>(i)];
      PreferencePair pair;
      try {
        pair.prompt = {{"user", row.at("prompt").get<std::string>()}};
        pair.chosen = row.at("clarification").get<std::string>();
        pair.rejected = row.at("overcommitted").get<std::string>();
      } catch (const nlohmann::json::exception& e) {
        throw DataError("dpo: bad template row for '" + lang + "': " + e.what());
      }
      pair.language = lang;
      pair.setting = dataset::Setting::Normal;
      pair.relation = "generic";
      pair.instance_id = "generic:" + lang + ":" + std::to_string(i);
      pair.chosen_model = "clarification_seed";
      pair.rejected_model = "overcommitted_seed";
      pair.chosen_category = judge::ResponseCategory::Clarification;
      pairs.push_back(std::move(pair));
    }
  }
  return pairs;
}

nlohmann::json pair_to_json(const PreferencePair& pair) {
  nlohmann::json prompt = nlohmann::json::array();
  for (const auto& m : pair.prompt) {
    prompt.push_back({{"role", m.role}, {"content", m.content}});
  }
  return {{"prompt", std::move(prompt)},
          {"chosen", pair.chosen},
          {"rejected", pair.rejected},
          {"meta",
           {{"language", pair.language},
            {"setting", dataset::to_string(pair.setting)},
            {"relation", pair.relation},
            {"instance_id", pair.instance_id},
            {"chosen_model", pair.chosen_model},
            {"rejected_model", pair.rejected_model},
            {"chosen_category", judge::to_string(pair.chosen_category)}}}};
}

PreferencePair pair_from_json(const nlohmann::json& j) {
  PreferencePair pair;
  try {
    for (const auto& m : j.at("prompt")) {
      pair.prompt.push_back({m.at("role").get<std::string>(), m.at("content").get<std::string>()});
    }
    pair.chosen = j.at("chosen").get<std::string>();
    pair.rejected = j.at("rejected").get<std::string>();
    const auto& meta = j.at("meta");
    pair.language = meta.at("language").get<std::string>();
    pair.setting = dataset::setting_from_string(meta.at("setting").get<std::string>());
    pair.relation = meta.at("relation").get<std::string>();
    pair.instance_id = meta.at("instance_id").get<std::string>();
    pair.chosen_model = meta.at("chosen_model").get<std::string>();
    pair.rejected_model = meta.at("rejected_model").get<std::string>();
    pair.chosen_category = judge::category_from_string(meta.at("chosen_category").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("preference pair: ") + e.what());
  }
  return pair;
}

nlohmann::json training_recipe() {
  return {{"method", "dpo"},
          {"beta", 0.1},
          {"learning_rate", 5e-5},
          {"per_device_train_batch_size", 4},
          {"num_train_epochs", 2},
          {"lora",
           {{"r", 64},
            {"lora_alpha", 16},
            {"lora_dropout", 0.05},
            {"target_modules", {"q_proj", "v_proj", "k_proj", "o_proj"}},
            {"bias", "none"}}}};
}

void export_pairs(std::vector<PreferencePair> pairs, const std::filesystem::path& path) {
  std::stable_sort(pairs.begin(), pairs.end(),
                   [](const PreferencePair& a, const PreferencePair& b) {
                     return std::tie(a.instance_id, a.language, a.setting) <
                            std::tie(b.instance_id, b.language, b.setting);
                   });
  std::vector<nlohmann::json> rows;
  rows.reserve(pairs.size());
  for (const auto& p : pairs) rows.push_back(pair_to_json(p));
  jsonl::write_file(path, rows);
  jsonl::write_json_file(path.parent_path() / "training_recipe.json", training_recipe());
}

std::vector<PreferencePair> read_pairs(const std::filesystem::path& path) {
  auto rows = jsonl::read_file(path);
  std::vector<PreferencePair> out;
  out.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    try {
      out.push_back(pair_from_json(rows[i]));
    } catch (const DataError& e) {
      throw DataError(path.string() + ":" + std::to_string(i + 1) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace refbench::dpo
