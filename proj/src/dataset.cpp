#include "refbench/dataset.hpp"

#include <algorithm>
#include <set>

#include "refbench/error.hpp"
#include "refbench/jsonl.hpp"
#include "refbench/random.hpp"
#include "refbench/text.hpp"

namespace refbench::dataset {

namespace {

// Foreign-negative candidates for a relation: every entity of every other
// relation whose canonical name does not also occur in `rel` (multi-relation
// entities must not sneak back in as "negatives" for their own relation).
// Bank file order, deduplicated.
std::vector<std::string> foreign_candidates(const kb::RelationBank& bank,
                                            const kb::Relation& rel) {
  std::set<std::string> own;
  for (const auto& e : rel.entities) own.insert(e.canonical);
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& other : bank.relations) {
    if (other.id == rel.id) continue;
    for (const auto& e : other.entities) {
      if (own.count(e.canonical) || !seen.insert(e.canonical).second) continue;
      out.push_back(e.canonical);
    }
  }
  return out;
}

const kb::EntityRecord* find_in_relation(const kb::Relation& rel, const std::string& canonical) {
  for (const auto& e : rel.entities) {
    if (e.canonical == canonical) return &e;
  }
  return nullptr;
}

// Record for a foreign entity: first occurrence outside `skip`, bank order.
const kb::EntityRecord* find_foreign(const kb::RelationBank& bank, const kb::RelationId& skip,
                                     const std::string& canonical) {
  for (const auto& rel : bank.relations) {
    if (rel.id == skip) continue;
    if (const auto* e = find_in_relation(rel, canonical)) return e;
  }
  return nullptr;
}

}  // namespace

std::string to_string(InstanceKind k) {
  return k == InstanceKind::ClearRef ? "clearref" : "sharedref";
}

InstanceKind kind_from_string(const std::string& s) {
  std::string t = text::to_lower_ascii(s);
  if (t == "clearref") return InstanceKind::ClearRef;
  if (t == "sharedref") return InstanceKind::SharedRef;
  throw DataError("unknown instance kind '" + s + "'");
}

std::string to_string(Setting s) {
  switch (s) {
    case Setting::Normal: return "normal";
    case Setting::Simple: return "simple";
    case Setting::CoT: return "cot";
  }
  throw DataError("unknown setting value");
}

Setting setting_from_string(const std::string& s) {
  std::string t = text::to_lower_ascii(s);
  if (t == "normal") return Setting::Normal;
  if (t == "simple") return Setting::Simple;
  if (t == "cot") return Setting::CoT;
  throw DataError("unknown setting '" + s + "'");
}

std::vector<std::string> Instance::combined() const {
  std::vector<std::string> out = positives;
  out.push_back(negative);
  return out;
}

std::vector<std::string> Instance::presented() const {
  auto all = combined();
  std::vector<std::string> out;
  out.reserve(all.size());
  for (int idx : order) out.push_back(all.at(static_cast<std::size_t>(idx)));
  return out;
}

std::string make_instance_id(InstanceKind kind, const kb::RelationId& relation,
                             const std::vector<std::string>& positives,
                             const std::string& negative, const std::vector<int>& order) {
  std::vector<std::string> order_str;
  order_str.reserve(order.size());
  for (int i : order) order_str.push_back(std::to_string(i));
  return to_string(kind) + "|" + relation.str() + "|" + text::join(positives, ",") + "|" +
         negative + "|" + text::join(order_str, ",");
}

std::vector<Instance> build_clearref(const kb::RelationBank& bank, std::uint64_t seed) {
  if (bank.relations.size() < 2) {
    throw DataError("build_clearref: a single-relation bank has no foreign negatives");
  }
  std::vector<Instance> out;
  for (const auto& rel : bank.relations) {
    auto candidates = foreign_candidates(bank, rel);
    if (candidates.empty()) {
      throw DataError("build_clearref: no foreign negatives exist for relation '" +
                      rel.id.str() + "'");
    }
    for (const auto& ent : rel.entities) {
      rnd::SeededRng rng(rnd::mix_seed(seed, "clearref|" + rel.id.str() + "|" + ent.canonical));
      Instance inst;
      inst.kind = InstanceKind::ClearRef;
      inst.relation = rel.id;
      inst.positives = {ent.canonical};
      inst.negative = candidates[rng.bounded(candidates.size())];
      inst.order = {0, 1};
      inst.id = make_instance_id(inst.kind, inst.relation, inst.positives, inst.negative,
                                 inst.order);
      out.push_back(std::move(inst));
    }
  }
  return out;
}

std::vector<Instance> build_sharedref(const kb::RelationBank& bank, std::uint64_t seed) {
  if (bank.relations.size() < 2) {
    throw DataError("build_sharedref: a single-relation bank has no foreign negatives");
  }
  bool any_pair = std::any_of(bank.relations.begin(), bank.relations.end(),
                              [](const kb::Relation& r) { return r.entities.size() >= 2; });
  if (!any_pair) {
    throw DataError("build_sharedref: no relation has two entities to pair");
  }
  std::vector<Instance> out;
  for (const auto& rel : bank.relations) {
    if (rel.entities.size() < 2) continue;
    auto candidates = foreign_candidates(bank, rel);
    if (candidates.empty()) {
      throw DataError("build_sharedref: no foreign negatives exist for relation '" +
                      rel.id.str() + "'");
    }
    for (std::size_t i = 0; i < rel.entities.size(); ++i) {
      for (std::size_t j = i + 1; j < rel.entities.size(); ++j) {
        const auto& a = rel.entities[i].canonical;
        const auto& b = rel.entities[j].canonical;
        rnd::SeededRng rng(rnd::mix_seed(seed, "sharedref|" + rel.id.str() + "|" + a + "," + b));
        Instance inst;
        inst.kind = InstanceKind::SharedRef;
        inst.relation = rel.id;
        inst.positives = {a, b};
        inst.negative = candidates[rng.bounded(candidates.size())];
        inst.order = {0, 1, 2};
        inst.id = make_instance_id(inst.kind, inst.relation, inst.positives, inst.negative,
                                   inst.order);
        out.push_back(std::move(inst));
      }
    }
  }
  return out;
}

std::vector<Instance> permutations_of(const Instance& instance) {
  std::vector<int> perm(instance.positives.size() + 1);
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = static_cast<int>(i);
  std::vector<Instance> out;
  do {
    Instance copy = instance;
    copy.order = perm;
    copy.id = make_instance_id(copy.kind, copy.relation, copy.positives, copy.negative,
                               copy.order);
    out.push_back(std::move(copy));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return out;
}

namespace {

// Entity records in combined order (positives then negative), resolved from
// the bank; errors name the missing piece.
std::vector<const kb::EntityRecord*> resolve_records(const Instance& instance,
                                                     const kb::RelationBank& bank) {
  const kb::Relation* rel = bank.find(instance.relation);
  if (rel == nullptr) {
    throw DataError("assemble: bank has no relation '" + instance.relation.str() + "'");
  }
  std::vector<const kb::EntityRecord*> records;
  for (const auto& canonical : instance.positives) {
    const auto* e = find_in_relation(*rel, canonical);
    if (e == nullptr) {
      throw DataError("assemble: positive '" + canonical + "' is not in relation '" +
                      rel->id.str() + "'");
    }
    records.push_back(e);
  }
  const auto* neg = find_foreign(bank, rel->id, instance.negative);
  if (neg == nullptr) {
    throw DataError("assemble: negative '" + instance.negative +
                    "' not found outside relation '" + rel->id.str() + "'");
  }
  records.push_back(neg);
  return records;
}

}  // namespace

Conversation assemble_conversation(const Instance& instance, const kb::RelationBank& bank,
                                   const std::string& language, Setting setting) {
  if (std::find(bank.languages.begin(), bank.languages.end(), language) ==
      bank.languages.end()) {
    throw DataError("assemble: bank does not cover language '" + language + "'");
  }
  const kb::Relation* rel = bank.find(instance.relation);
  if (rel == nullptr) {
    throw DataError("assemble: bank has no relation '" + instance.relation.str() + "'");
  }
  std::vector<const kb::EntityRecord*> records = resolve_records(instance, bank);

  std::vector<std::string> names;
  std::vector<std::string> sentences;
  for (int idx : instance.order) {
    const auto* e = records.at(static_cast<std::size_t>(idx));
    auto nm = e->names.find(language);
    if (nm == e->names.end() || nm->second.empty()) {
      throw DataError("assemble: entity '" + e->canonical + "' has no name for language '" +
                      language + "'");
    }
    auto sn = e->sentences.find(language);
    if (sn == e->sentences.end() || sn->second.empty()) {
      throw DataError("assemble: entity '" + e->canonical + "' has no sentence for language '" +
                      language + "'");
    }
    names.push_back(nm->second);
    sentences.push_back(sn->second);
  }

  std::string question = rel->question.at(language);
  if (setting == Setting::Simple) {
    question += " " + bank.simple_suffix.at(language);
  } else if (setting == Setting::CoT) {
    question += " " + kb::cot_suffix_for(bank, language);
  }

  Conversation c;
  c.instance_id = instance.id;
  c.language = language;
  c.setting = setting;
  c.turns.push_back(
      {"user", text::replace_all(bank.starter.at(language), "<entities>", text::join(names, ", "))});
  c.turns.push_back({"assistant", text::join(sentences, "\n")});
  c.turns.push_back({"user", std::move(question)});
  return c;
}

std::vector<std::string> presentation_names(const Instance& instance,
                                            const kb::RelationBank& bank,
                                            const std::string& language) {
  std::vector<const kb::EntityRecord*> records = resolve_records(instance, bank);
  std::vector<std::string> names;
  names.reserve(records.size());
  for (int idx : instance.order) {
    const auto* e = records.at(static_cast<std::size_t>(idx));
    auto nm = e->names.find(language);
    if (nm == e->names.end() || nm->second.empty()) {
      throw DataError("entity '" + e->canonical + "' has no name for language '" + language +
                      "'");
    }
    names.push_back(nm->second);
  }
  return names;
}

std::vector<provider::Message> conversation_messages(const Conversation& c) {
  std::vector<provider::Message> out;
  out.reserve(c.turns.size());
  for (const auto& t : c.turns) out.push_back({t.role, t.text});
  return out;
}

nlohmann::json instance_to_json(const Instance& instance) {
  nlohmann::json j = instance.extra.is_object() ? instance.extra : nlohmann::json::object();
  j["id"] = instance.id;
  j["kind"] = to_string(instance.kind);
  j["relation"] = {{"predicate", kb::to_string(instance.relation.predicate)},
                   {"object", instance.relation.object}};
  j["positives"] = instance.positives;
  j["negative"] = instance.negative;
  j["order"] = instance.order;
  j["verification"] = {{"satisfies", instance.verification.satisfies},
                       {"explanation", instance.verification.explanation},
                       {"model", instance.verification.model}};
  return j;
}

Instance instance_from_json(const nlohmann::json& j) {
  static const std::set<std::string> known = {"id",       "kind",  "relation",
                                             "positives", "negative", "order",
                                             "verification"};
  Instance inst;
  try {
    inst.id = j.at("id").get<std::string>();
    inst.kind = kind_from_string(j.at("kind").get<std::string>());
    inst.relation.predicate =
        kb::predicate_from_string(j.at("relation").at("predicate").get<std::string>());
    inst.relation.object = j.at("relation").at("object").get<std::string>();
    inst.positives = j.at("positives").get<std::vector<std::string>>();
    inst.negative = j.at("negative").get<std::string>();
    inst.order = j.at("order").get<std::vector<int>>();
    const auto& v = j.at("verification");
    inst.verification.satisfies = v.at("satisfies").get<bool>();
    inst.verification.explanation = v.at("explanation").get<std::string>();
    inst.verification.model = v.at("model").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("instance: ") + e.what());
  }
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) inst.extra[key] = value;
  }

  const std::size_t expected_positives = inst.kind == InstanceKind::ClearRef ? 1 : 2;
  if (inst.positives.size() != expected_positives) {
    throw DataError("instance " + inst.id + ": " + to_string(inst.kind) + " must carry " +
                    std::to_string(expected_positives) + " positive(s)");
  }
  for (const auto& p : inst.positives) {
    if (p == inst.negative) {
      throw DataError("instance " + inst.id + ": negative '" + inst.negative +
                      "' duplicates a positive");
    }
  }
  if (inst.order.size() != inst.positives.size() + 1) {
    throw DataError("instance " + inst.id + ": order size mismatch");
  }
  std::vector<int> sorted = inst.order;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (sorted[i] != static_cast<int>(i)) {
      throw DataError("instance " + inst.id + ": order is not a permutation");
    }
  }
  const std::string expect_id =
      make_instance_id(inst.kind, inst.relation, inst.positives, inst.negative, inst.order);
  if (inst.id != expect_id) {
    throw DataError("instance id '" + inst.id + "' does not match its contents ('" + expect_id +
                    "')");
  }
  return inst;
}

nlohmann::json conversation_to_json(const Conversation& c) {
  nlohmann::json turns = nlohmann::json::array();
  for (const auto& t : c.turns) turns.push_back({{"role", t.role}, {"text", t.text}});
  return {{"instance_id", c.instance_id},
          {"language", c.language},
          {"setting", to_string(c.setting)},
          {"turns", std::move(turns)}};
}

Conversation conversation_from_json(const nlohmann::json& j) {
  Conversation c;
  try {
    c.instance_id = j.at("instance_id").get<std::string>();
    c.language = j.at("language").get<std::string>();
    c.setting = setting_from_string(j.at("setting").get<std::string>());
    for (const auto& t : j.at("turns")) {
      c.turns.push_back({t.at("role").get<std::string>(), t.at("text").get<std::string>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("conversation: ") + e.what());
  }
  return c;
}

void write_instances(const std::vector<Instance>& instances, const std::filesystem::path& path) {
  std::vector<nlohmann::json> rows;
  rows.reserve(instances.size());
  for (const auto& inst : instances) rows.push_back(instance_to_json(inst));
  jsonl::write_file(path, rows);
}

std::vector<Instance> read_instances(const std::filesystem::path& path,
                                     const kb::RelationBank* bank) {
  auto rows = jsonl::read_file(path);
  std::vector<Instance> out;
  out.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    Instance inst;
    try {
      inst = instance_from_json(rows[i]);
      if (bank != nullptr) {
        const kb::Relation* rel = bank->find(inst.relation);
        if (rel == nullptr) {
          throw DataError("relation '" + inst.relation.str() + "' not in bank");
        }
        for (const auto& p : inst.positives) {
          if (find_in_relation(*rel, p) == nullptr) {
            throw DataError("positive '" + p + "' not in relation '" + rel->id.str() + "'");
          }
        }
        if (find_in_relation(*rel, inst.negative) != nullptr) {
          throw DataError("negative '" + inst.negative + "' belongs to the instance relation");
        }
        if (find_foreign(*bank, rel->id, inst.negative) == nullptr) {
          throw DataError("negative '" + inst.negative + "' not found in any other relation");
        }
      }
    } catch (const DataError& e) {
      throw DataError(path.string() + ":" + std::to_string(i + 1) + ": " + e.what());
    }
    out.push_back(std::move(inst));
  }
  return out;
}

std::string render_verifier_prompt(const std::string& word, const kb::RelationId& relation) {
  return "Does the word '" + word + "' satisfy the relation '" + relation.str() +
         "'?\nAnswer with a brief explanation and either True or False for satisfies.";
}

std::pair<bool, std::string> parse_verifier_output(const std::string& raw) {
  const std::string lower = text::to_lower_ascii(raw);
  const auto is_word_char = [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
  };
  const auto standalone = [&](std::size_t pos, std::size_t len) {
    const bool left_ok = pos == 0 || !is_word_char(lower[pos - 1]);
    const bool right_ok = pos + len >= lower.size() || !is_word_char(lower[pos + len]);
    return left_ok && right_ok;
  };

  int verdict = -1;  // 0 = false, 1 = true
  std::size_t best = std::string::npos;
  for (const auto& [token, value] : {std::pair<std::string, int>{"true", 1}, {"false", 0}}) {
    std::size_t pos = 0;
    while ((pos = lower.find(token, pos)) != std::string::npos) {
      if (standalone(pos, token.size()) && (best == std::string::npos || pos > best)) {
        best = pos;
        verdict = value;
      }
      pos += token.size();
    }
  }
  if (verdict < 0) {
    throw JudgeParseError("verifier output contains no True/False verdict", raw);
  }
  return {verdict == 1, std::string(text::trim(raw))};
}

VerificationResult verify_negative(provider::Provider& verifier, const std::string& entity,
                                   const kb::RelationId& relation) {
  const auto response =
      verifier.complete({{"user", render_verifier_prompt(entity, relation)}});
  auto [satisfies, explanation] = parse_verifier_output(response.text);
  VerificationResult vr;
  vr.satisfies = satisfies;
  vr.explanation = std::move(explanation);
  vr.model = verifier.config().name;
  vr.raw = response.text;
  return vr;
}

VerifyOutcome verify_instances(std::vector<Instance> instances, const kb::RelationBank& bank,
                               provider::Provider& verifier, std::uint64_t seed,
                               int max_attempts) {
  VerifyOutcome outcome;
  for (auto& inst : instances) {
    const std::string entry_id = inst.id;
    const kb::Relation* rel = bank.find(inst.relation);
    if (rel == nullptr) {
      throw DataError("verify: relation '" + inst.relation.str() + "' not in bank");
    }
    auto candidates = foreign_candidates(bank, *rel);
    std::set<std::string> own(inst.positives.begin(), inst.positives.end());
    std::set<std::string> tried{inst.negative};
    rnd::SeededRng rng(rnd::mix_seed(seed, "verify|" + entry_id));

    std::string current = inst.negative;
    std::vector<nlohmann::json> attempts;
    bool settled = false;
    bool excluded = false;
    for (int attempt = 0; attempt < max_attempts; ++attempt) {
      VerificationResult vr;
      try {
        vr = verify_negative(verifier, current, inst.relation);
      } catch (const JudgeParseError& e) {
        attempts.push_back({{"negative", current}, {"error", "unparseable"}, {"raw", e.raw()}});
        outcome.excluded.push_back({entry_id, "unparseable verifier output", attempts});
        excluded = true;
        break;
      }
      attempts.push_back(
          {{"negative", current}, {"satisfies", vr.satisfies}, {"raw", vr.raw}});
      if (!vr.satisfies) {
        inst.negative = current;
        inst.verification = vr;
        inst.id = make_instance_id(inst.kind, inst.relation, inst.positives, inst.negative,
                                   inst.order);
        settled = true;
        break;
      }
      std::vector<std::string> remaining;
      for (const auto& c : candidates) {
        if (!tried.count(c) && !own.count(c)) remaining.push_back(c);
      }
      if (remaining.empty()) break;
      current = remaining[rng.bounded(remaining.size())];
      tried.insert(current);
    }
    if (settled) {
      outcome.kept.push_back(inst);
    } else if (!excluded) {
      outcome.excluded.push_back(
          {entry_id, "no verified negative within " + std::to_string(max_attempts) + " attempts",
           attempts});
    }
  }
  return outcome;
}

}  // namespace refbench::dataset
