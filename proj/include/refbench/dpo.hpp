#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "refbench/dataset.hpp"
#include "refbench/kb.hpp"
#include "refbench/scoring.hpp"

namespace refbench::dpo {

// One model's scored response together with its raw text.
struct RunRecord {
  scoring::ScoredResponse scored;
  std::string response_text;
};

struct PreferencePair {
  std::vector<provider::Message> prompt;  // full conversation, chat-message shape
  std::string chosen;
  std::string rejected;
  std::string language;
  dataset::Setting setting = dataset::Setting::Normal;
  std::string relation;  // "CapableOf fly" etc.; "generic" for seeded pairs
  std::string instance_id;
  std::string chosen_model;
  std::string rejected_model;
  judge::ResponseCategory chosen_category = judge::ResponseCategory::Clarification;

  friend bool operator==(const PreferencePair&, const PreferencePair&) = default;
};

// For every (instance, language, setting) where the base model is incorrect
// and at least one donor is direct: one pair, donor drawn uniformly (seeded),
// entity presentation order re-randomized and the prompt re-assembled to
// match. Returns an empty list (callers warn) when nothing qualifies.
std::vector<PreferencePair> build_preference_pairs(
    const kb::RelationBank& bank, const std::vector<dataset::Instance>& instances,
    const std::vector<RunRecord>& base_run, const std::vector<RunRecord>& donor_runs,
    const std::optional<kb::RelationId>& relation_filter, std::uint64_t seed);

// Seeded clarification pairs from the per-language template file
// ({language: [{prompt, clarification, overcommitted}, ...]}); takes the first
// n_per_language rows per requested language.
std::vector<PreferencePair> inject_generic_clarifications(const nlohmann::json& templates,
                                                          const std::vector<std::string>& languages,
                                                          int n_per_language);

nlohmann::json pair_to_json(const PreferencePair& pair);
PreferencePair pair_from_json(const nlohmann::json& j);

// Fixed fine-tuning configuration exported beside the pairs so an external
// trainer can reproduce the recipe.
nlohmann::json training_recipe();

// JSONL sorted by (instance_id, language, setting) plus a training_recipe.json
// sidecar in the same directory.
void export_pairs(std::vector<PreferencePair> pairs, const std::filesystem::path& path);
std::vector<PreferencePair> read_pairs(const std::filesystem::path& path);

}  // namespace refbench::dpo
