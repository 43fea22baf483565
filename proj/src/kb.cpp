#include "refbench/kb.hpp"

#include <algorithm>
#include <set>

#include "refbench/error.hpp"
#include "refbench/jsonl.hpp"
#include "refbench/text.hpp"

namespace refbench::kb {

namespace {

// Ids join entity names with ',' and id segments with '|'; canonical names
// must avoid both so ids stay injective.
constexpr std::string_view kReservedIdChars = "|,";

bool is_object_token(const std::string& s) {
  if (s.empty()) return false;
  return std::all_of(s.begin(), s.end(), [](unsigned char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
  });
}

[[noreturn]] void fail(const std::string& msg) { throw DataError("bank: " + msg); }

std::map<std::string, std::string> string_map(const nlohmann::json& j, const std::string& where) {
  if (!j.is_object()) fail(where + " must be an object of strings");
  std::map<std::string, std::string> out;
  for (const auto& [k, v] : j.items()) {
    if (!v.is_string()) fail(where + "." + k + " must be a string");
    out[k] = v.get<std::string>();
  }
  return out;
}

}  // namespace

std::string to_string(Predicate p) {
  switch (p) {
    case Predicate::CapableOf: return "CapableOf";
    case Predicate::HasProperty: return "HasProperty";
    case Predicate::MadeOf: return "MadeOf";
  }
  throw DataError("unknown predicate value");
}

Predicate predicate_from_string(const std::string& s) {
  if (s == "CapableOf") return Predicate::CapableOf;
  if (s == "HasProperty") return Predicate::HasProperty;
  if (s == "MadeOf") return Predicate::MadeOf;
  throw DataError("bank: unknown predicate '" + s + "'");
}

std::string RelationId::str() const { return to_string(predicate) + " " + object; }

const Relation* RelationBank::find(const RelationId& id) const {
  for (const auto& r : relations) {
    if (r.id == id) return &r;
  }
  return nullptr;
}

std::size_t RelationBank::entity_count() const {
  std::size_t n = 0;
  for (const auto& r : relations) n += r.entities.size();
  return n;
}

std::vector<std::string> default_determiners(const std::string& language) {
  if (language == "en") return {"the ", "a ", "an "};
  if (language == "fr") {
    return {"le ", "la ", "les ", "un ", "une ", "des ", "l'", "l’"};
  }
  if (language == "ar") return {"ال"};  // the al- prefix
  return {};
}

std::string cot_suffix_for(const RelationBank& bank, const std::string& language) {
  if (auto it = bank.cot_suffix.find(language); it != bank.cot_suffix.end()) {
    return it->second;
  }
  if (auto it = bank.cot_suffix.find("en"); it != bank.cot_suffix.end()) {
    return it->second;
  }
  return std::string(kDefaultCotSuffix);
}

SentenceValidation validate_context_sentence(const EntityRecord& entity,
                                             const std::string& language,
                                             const std::vector<std::string>& determiners) {
  auto sent_it = entity.sentences.find(language);
  if (sent_it == entity.sentences.end() || sent_it->second.empty()) {
    return {SentenceCheck::MissingSentence,
            "entity '" + entity.canonical + "' has no sentence for language '" + language + "'"};
  }
  auto name_it = entity.names.find(language);
  if (name_it == entity.names.end() || name_it->second.empty()) {
    return {SentenceCheck::MissingSentence,
            "entity '" + entity.canonical + "' has no name for language '" + language + "'"};
  }
  std::string_view rest = text::strip_one_determiner(sent_it->second, determiners);
  if (!text::starts_with_fold(rest, name_it->second)) {
    return {SentenceCheck::PrefixMismatch,
            "sentence for entity '" + entity.canonical + "' (" + language +
                ") does not begin with '" + name_it->second + "': " + sent_it->second};
  }
  return {SentenceCheck::Ok, ""};
}

void validate_bank(const RelationBank& bank) {
  if (bank.languages.empty()) fail("languages list is empty");
  {
    std::set<std::string> seen;
    for (const auto& lang : bank.languages) {
      if (lang.empty()) fail("empty language code");
      if (!seen.insert(lang).second) fail("duplicate language '" + lang + "'");
    }
  }

  std::vector<std::string> gaps;
  for (const auto& lang : bank.languages) {
    auto st = bank.starter.find(lang);
    if (st == bank.starter.end() || st->second.empty()) {
      gaps.push_back("starter." + lang);
    } else if (st->second.find("<entities>") == std::string::npos) {
      fail("starter." + lang + " lacks the <entities> placeholder");
    }
    auto sx = bank.simple_suffix.find(lang);
    if (sx == bank.simple_suffix.end() || sx->second.empty()) {
      gaps.push_back("simple_suffix." + lang);
    }
  }

  if (bank.relations.empty()) fail("no relations");
  std::set<std::pair<Predicate, std::string>> rel_ids;
  // canonical name -> (multi_relation everywhere, #relations carrying it)
  std::map<std::string, std::pair<bool, int>> canonical_uses;

  for (const auto& rel : bank.relations) {
    const std::string where = "relation '" + rel.id.str() + "'";
    if (!is_object_token(rel.id.object)) {
      fail(where + ": object must be a nonempty lowercase token");
    }
    if (!rel_ids.insert({rel.id.predicate, rel.id.object}).second) {
      fail("duplicate " + where);
    }
    for (const auto& lang : bank.languages) {
      auto q = rel.question.find(lang);
      if (q == rel.question.end() || q->second.empty()) {
        gaps.push_back("question." + lang + " for " + rel.id.str());
      } else if (q->second.find("<entities>") != std::string::npos) {
        fail(where + ": question for '" + lang + "' contains an unresolved placeholder");
      }
    }
    if (rel.entities.empty()) fail(where + " has no entities");

    std::set<std::string> canon_in_rel;
    for (const auto& ent : rel.entities) {
      if (ent.canonical.empty()) fail(where + ": entity with empty canonical name");
      if (ent.canonical.find_first_of(kReservedIdChars) != std::string::npos) {
        fail(where + ": canonical name '" + ent.canonical + "' contains a reserved character (| or ,)");
      }
      if (!canon_in_rel.insert(ent.canonical).second) {
        fail(where + ": duplicate entity '" + ent.canonical + "'");
      }
      auto& use = canonical_uses.try_emplace(ent.canonical, true, 0).first->second;
      use.first = use.first && ent.multi_relation;
      use.second += 1;

      for (const auto& lang : bank.languages) {
        auto nm = ent.names.find(lang);
        if (nm == ent.names.end() || nm->second.empty()) {
          gaps.push_back("names." + lang + " for entity '" + ent.canonical + "'");
          continue;
        }
        auto det = bank.determiners.find(lang);
        auto check = validate_context_sentence(
            ent, lang, det != bank.determiners.end() ? det->second : default_determiners(lang));
        if (check.status != SentenceCheck::Ok) fail(check.detail);
      }
    }
  }

  for (const auto& [canon, use] : canonical_uses) {
    if (use.second > 1 && !use.first) {
      fail("entity '" + canon + "' appears in " + std::to_string(use.second) +
           " relations without multi_relation flags");
    }
  }

  if (!gaps.empty()) {
    std::string msg = "missing language coverage: ";
    for (std::size_t i = 0; i < gaps.size(); ++i) {
      if (i > 0) msg += ", ";
      msg += gaps[i];
    }
    fail(msg);
  }
}

RelationBank bank_from_json(const nlohmann::json& j) {
  if (!j.is_object()) fail("top level must be an object");
  RelationBank bank;

  if (!j.contains("languages") || !j["languages"].is_array()) fail("missing 'languages' list");
  for (const auto& v : j["languages"]) {
    if (!v.is_string()) fail("languages entries must be strings");
    bank.languages.push_back(v.get<std::string>());
  }

  if (!j.contains("starter")) fail("missing 'starter'");
  bank.starter = string_map(j["starter"], "starter");
  if (!j.contains("simple_suffix")) fail("missing 'simple_suffix'");
  bank.simple_suffix = string_map(j["simple_suffix"], "simple_suffix");
  if (j.contains("cot_suffix")) bank.cot_suffix = string_map(j["cot_suffix"], "cot_suffix");

  for (const auto& lang : bank.languages) {
    bank.determiners[lang] = default_determiners(lang);
  }
  if (j.contains("determiners")) {
    const auto& d = j["determiners"];
    if (!d.is_object()) fail("'determiners' must be an object of string lists");
    for (const auto& [lang, lst] : d.items()) {
      if (!lst.is_array()) fail("determiners." + lang + " must be a list");
      std::vector<std::string> arts;
      for (const auto& a : lst) {
        if (!a.is_string()) fail("determiners." + lang + " entries must be strings");
        arts.push_back(a.get<std::string>());
      }
      bank.determiners[lang] = std::move(arts);
    }
  }

  if (!j.contains("relations") || !j["relations"].is_array()) fail("missing 'relations' list");
  for (const auto& rj : j["relations"]) {
    if (!rj.is_object()) fail("relations entries must be objects");
    Relation rel;
    if (!rj.contains("predicate") || !rj["predicate"].is_string()) fail("relation missing 'predicate'");
    rel.id.predicate = predicate_from_string(rj["predicate"].get<std::string>());
    if (!rj.contains("object") || !rj["object"].is_string()) fail("relation missing 'object'");
    rel.id.object = rj["object"].get<std::string>();
    if (!rj.contains("question")) fail("relation '" + rel.id.str() + "' missing 'question'");
    rel.question = string_map(rj["question"], "question(" + rel.id.str() + ")");
    if (!rj.contains("entities") || !rj["entities"].is_array()) {
      fail("relation '" + rel.id.str() + "' missing 'entities'");
    }
    for (const auto& ej : rj["entities"]) {
      if (!ej.is_object()) fail("entity entries must be objects");
      EntityRecord ent;
      if (!ej.contains("canonical") || !ej["canonical"].is_string()) {
        fail("entity in '" + rel.id.str() + "' missing 'canonical'");
      }
      ent.canonical = ej["canonical"].get<std::string>();
      if (!ej.contains("names")) fail("entity '" + ent.canonical + "' missing 'names'");
      ent.names = string_map(ej["names"], "names(" + ent.canonical + ")");
      if (!ej.contains("sentences")) fail("entity '" + ent.canonical + "' missing 'sentences'");
      ent.sentences = string_map(ej["sentences"], "sentences(" + ent.canonical + ")");
      if (ej.contains("multi_relation")) {
        if (!ej["multi_relation"].is_boolean()) {
          fail("entity '" + ent.canonical + "': multi_relation must be a boolean");
        }
        ent.multi_relation = ej["multi_relation"].get<bool>();
      }
      rel.entities.push_back(std::move(ent));
    }
    bank.relations.push_back(std::move(rel));
  }
  return bank;
}

nlohmann::json bank_to_json(const RelationBank& bank) {
  nlohmann::json j;
  j["languages"] = bank.languages;
  j["starter"] = bank.starter;
  j["simple_suffix"] = bank.simple_suffix;
  if (!bank.cot_suffix.empty()) j["cot_suffix"] = bank.cot_suffix;
  j["determiners"] = bank.determiners;
  j["relations"] = nlohmann::json::array();
  for (const auto& rel : bank.relations) {
    nlohmann::json rj;
    rj["predicate"] = to_string(rel.id.predicate);
    rj["object"] = rel.id.object;
    rj["question"] = rel.question;
    rj["entities"] = nlohmann::json::array();
    for (const auto& ent : rel.entities) {
      nlohmann::json ej;
      ej["canonical"] = ent.canonical;
      ej["names"] = ent.names;
      ej["sentences"] = ent.sentences;
      if (ent.multi_relation) ej["multi_relation"] = true;
      rj["entities"].push_back(std::move(ej));
    }
    j["relations"].push_back(std::move(rj));
  }
  return j;
}

RelationBank load_relation_bank(const std::filesystem::path& path) {
  RelationBank bank = bank_from_json(jsonl::parse_file(path));
  validate_bank(bank);
  return bank;
}

void save_relation_bank(const RelationBank& bank, const std::filesystem::path& path) {
  jsonl::write_json_file(path, bank_to_json(bank));
}

}  // namespace refbench::kb
