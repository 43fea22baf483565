#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace refbench::kb {

enum class Predicate { CapableOf, HasProperty, MadeOf };

std::string to_string(Predicate p);
Predicate predicate_from_string(const std::string& s);  // throws DataError on unknown

struct RelationId {
  Predicate predicate = Predicate::CapableOf;
  std::string object;

  // "CapableOf fly" — the rendering used in ids and the verifier prompt.
  std::string str() const;

  friend bool operator==(const RelationId&, const RelationId&) = default;
  friend auto operator<=>(const RelationId&, const RelationId&) = default;
};

struct EntityRecord {
  std::string canonical;                         // English surface form; unique per relation
  std::map<std::string, std::string> names;      // language -> localized surface form
  std::map<std::string, std::string> sentences;  // language -> one context sentence
  // Entities listed under several relations must opt in explicitly.
  bool multi_relation = false;

  friend bool operator==(const EntityRecord&, const EntityRecord&) = default;
};

struct Relation {
  RelationId id;
  std::map<std::string, std::string> question;  // language -> ambiguous question
  std::vector<EntityRecord> entities;           // file order; load-bearing for permutations

  friend bool operator==(const Relation&, const Relation&) = default;
};

enum class SentenceCheck { Ok, MissingSentence, PrefixMismatch };

struct SentenceValidation {
  SentenceCheck status = SentenceCheck::Ok;
  std::string detail;  // filled on violation
};

struct RelationBank {
  std::vector<std::string> languages;
  std::map<std::string, std::string> starter;        // template with an <entities> slot
  std::map<std::string, std::string> simple_suffix;  // appended in the Simple setting
  std::map<std::string, std::string> cot_suffix;     // optional; see cot_suffix_for
  // Leading articles stripped before the sentence-prefix check. Entries are
  // verbatim prefixes including their separator ("the ", "l'", Arabic "ال").
  std::map<std::string, std::vector<std::string>> determiners;
  std::vector<Relation> relations;  // file order

  const Relation* find(const RelationId& id) const;
  std::size_t entity_count() const;

  friend bool operator==(const RelationBank&, const RelationBank&) = default;
};

// Instruction appended to the final question in the CoT setting when the bank
// does not localize one.
inline constexpr std::string_view kDefaultCotSuffix =
    "First, try resolving any ambiguity using commonsense knowledge. If the "
    "question remains ambiguous, your answer should be a clarification request. "
    "Otherwise, provide the answer. Put your final response after Response:.";

// Built-in article lists for the standard language codes; unknown codes get an
// empty list (no stripping).
std::vector<std::string> default_determiners(const std::string& language);

// cot_suffix[language], else cot_suffix["en"], else kDefaultCotSuffix.
std::string cot_suffix_for(const RelationBank& bank, const std::string& language);

// Ok iff the sentence for `language`, after stripping at most one leading
// determiner, begins with the localized entity name (case-folded comparison).
SentenceValidation validate_context_sentence(const EntityRecord& entity,
                                             const std::string& language,
                                             const std::vector<std::string>& determiners);

// Throws DataError naming the offending relation/entity/language on any
// invariant breach.
void validate_bank(const RelationBank& bank);

RelationBank bank_from_json(const nlohmann::json& j);
nlohmann::json bank_to_json(const RelationBank& bank);

// Parse + validate. Entity order is preserved exactly as listed in the file.
RelationBank load_relation_bank(const std::filesystem::path& path);
void save_relation_bank(const RelationBank& bank, const std::filesystem::path& path);

}  // namespace refbench::kb
