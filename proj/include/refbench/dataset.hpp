#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "refbench/kb.hpp"
#include "refbench/provider.hpp"

namespace refbench::dataset {

enum class InstanceKind { ClearRef, SharedRef };
enum class Setting { Normal, Simple, CoT };

std::string to_string(InstanceKind k);  // "clearref" | "sharedref"
InstanceKind kind_from_string(const std::string& s);
std::string to_string(Setting s);  // "normal" | "simple" | "cot"
Setting setting_from_string(const std::string& s);

struct VerificationResult {
  bool satisfies = false;
  std::string explanation;
  std::string model;  // verifier identity; "" = not verified
  std::string raw;    // verbatim verifier output; diagnostic only, not serialized

  friend bool operator==(const VerificationResult& a, const VerificationResult& b) {
    return a.satisfies == b.satisfies && a.explanation == b.explanation && a.model == b.model;
  }
};

struct Instance {
  std::string id;
  InstanceKind kind = InstanceKind::ClearRef;
  kb::RelationId relation;
  std::vector<std::string> positives;  // canonical names, bank order
  std::string negative;                // canonical name from a foreign relation
  // Presentation permutation: slot j of the conversation shows combined()[order[j]].
  std::vector<int> order;
  VerificationResult verification;
  nlohmann::json extra = nlohmann::json::object();  // unknown fields, kept on round-trip

  std::vector<std::string> combined() const;   // positives then negative
  std::vector<std::string> presented() const;  // canonical names in presentation order

  friend bool operator==(const Instance&, const Instance&) = default;
};

// Pure function of its arguments; injective because canonical names may not
// contain '|' or ','.
std::string make_instance_id(InstanceKind kind, const kb::RelationId& relation,
                             const std::vector<std::string>& positives,
                             const std::string& negative, const std::vector<int>& order);

// One instance per entity: the entity as sole positive plus a seeded uniform
// negative from the other relations. Order fixed to {0, 1}.
std::vector<Instance> build_clearref(const kb::RelationBank& bank, std::uint64_t seed);

// One instance per unordered within-relation entity pair plus a seeded foreign
// negative. Order fixed to {0, 1, 2}.
std::vector<Instance> build_sharedref(const kb::RelationBank& bank, std::uint64_t seed);

// Expands one instance into one per permutation of its entities (2 or 6),
// lexicographic order; ids reflect the ordering.
std::vector<Instance> permutations_of(const Instance& instance);

struct Turn {
  std::string role;  // "user" | "assistant"
  std::string text;

  friend bool operator==(const Turn&, const Turn&) = default;
};

struct Conversation {
  std::string instance_id;
  std::string language;
  Setting setting = Setting::Normal;
  std::vector<Turn> turns;

  const std::string& question() const { return turns.back().text; }

  friend bool operator==(const Conversation&, const Conversation&) = default;
};

// user starter naming the entities -> assistant context sentences (one per
// line, presentation order) -> user question with the setting's suffix.
Conversation assemble_conversation(const Instance& instance, const kb::RelationBank& bank,
                                   const std::string& language, Setting setting);

// Localized surface forms in presentation order — the entity list handed to
// the judge. Parallel to presented(), which holds the canonical names.
std::vector<std::string> presentation_names(const Instance& instance,
                                            const kb::RelationBank& bank,
                                            const std::string& language);

std::vector<provider::Message> conversation_messages(const Conversation& c);

nlohmann::json instance_to_json(const Instance& instance);
Instance instance_from_json(const nlohmann::json& j);
nlohmann::json conversation_to_json(const Conversation& c);
Conversation conversation_from_json(const nlohmann::json& j);

void write_instances(const std::vector<Instance>& instances, const std::filesystem::path& path);
// Validates every structural invariant; with a bank also cross-checks relation
// membership (positives inside, negative foreign).
std::vector<Instance> read_instances(const std::filesystem::path& path,
                                     const kb::RelationBank* bank = nullptr);

std::string render_verifier_prompt(const std::string& word, const kb::RelationId& relation);

// Parses the trailing True/False judgment; returns (satisfies, explanation).
// Throws JudgeParseError when no verdict token is found.
std::pair<bool, std::string> parse_verifier_output(const std::string& raw);

VerificationResult verify_negative(provider::Provider& verifier, const std::string& entity,
                                   const kb::RelationId& relation);

struct ExclusionRecord {
  std::string instance_id;  // id at entry (pre-redraw)
  std::string reason;
  std::vector<nlohmann::json> attempts;  // {negative, satisfies|error, raw}
};

struct VerifyOutcome {
  std::vector<Instance> kept;
  std::vector<ExclusionRecord> excluded;
};

// Verifies each instance's negative; on satisfies=true redraws a fresh foreign
// negative (same seeded substream) up to max_attempts total verifications, then
// excludes. Unparseable verifier output excludes immediately. Ids are
// recomputed when a redraw changes the negative.
VerifyOutcome verify_instances(std::vector<Instance> instances, const kb::RelationBank& bank,
                               provider::Provider& verifier, std::uint64_t seed,
                               int max_attempts = 10);

}  // namespace refbench::dataset
