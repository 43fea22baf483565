#include "refbench/scoring.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "refbench/error.hpp"
#include "refbench/jsonl.hpp"
#include "refbench/text.hpp"

namespace refbench::scoring {

std::string to_string(HedgeRule r) { return r == HedgeRule::Literal ? "literal" : "strict"; }

HedgeRule hedge_rule_from_string(const std::string& s) {
  std::string t = text::to_lower_ascii(s);
  if (t == "literal") return HedgeRule::Literal;
  if (t == "strict") return HedgeRule::Strict;
  throw ConfigError("unknown hedge rule '" + s + "' (expected literal|strict)");
}

ScoredResponse score(const dataset::Instance& instance, const judge::JudgeVerdict& verdict,
                     HedgeRule rule) {
  if (verdict.instance_id != instance.id) {
    throw DataError("score: verdict for '" + verdict.instance_id +
                    "' paired with instance '" + instance.id + "'");
  }
  const auto entities = instance.combined();
  for (const auto& m : verdict.mentions) {
    if (std::find(entities.begin(), entities.end(), m) == entities.end()) {
      throw DataError("score: mention '" + m + "' is not an entity of instance '" +
                      instance.id + "'");
    }
  }

  std::vector<std::string> mentions = verdict.mentions;
  std::sort(mentions.begin(), mentions.end());
  std::vector<std::string> positives = instance.positives;
  std::sort(positives.begin(), positives.end());

  const bool has_all_positives = std::includes(mentions.begin(), mentions.end(),
                                               positives.begin(), positives.end());
  const bool has_any_positive = std::any_of(
      positives.begin(), positives.end(), [&](const std::string& p) {
        return std::binary_search(mentions.begin(), mentions.end(), p);
      });

  bool correct = false;
  switch (verdict.category) {
    case judge::ResponseCategory::Clarification:
      correct = true;
      break;
    case judge::ResponseCategory::Hedge:
      correct = rule == HedgeRule::Literal ? !mentions.empty() : has_any_positive;
      break;
    case judge::ResponseCategory::AnswerAttempt:
      correct = has_all_positives;
      break;
    case judge::ResponseCategory::Refuse:
    case judge::ResponseCategory::Missing:
      correct = false;
      break;
  }

  const bool non_refusal = verdict.category != judge::ResponseCategory::Refuse &&
                           verdict.category != judge::ResponseCategory::Missing;
  const bool direct = non_refusal && mentions == positives;

  bool preferred_met;
  if (instance.kind == dataset::InstanceKind::SharedRef) {
    preferred_met = direct;
  } else {
    preferred_met = verdict.category == judge::ResponseCategory::AnswerAttempt && correct;
  }

  ScoredResponse s;
  s.instance_id = instance.id;
  s.model = verdict.model;
  s.language = verdict.language;
  s.setting = verdict.setting;
  s.kind = instance.kind;
  s.category = verdict.category;
  s.mentions = std::move(mentions);
  s.judge_model = verdict.judge_model;
  s.correct = correct;
  s.direct = direct;
  s.preferred_met = preferred_met;
  return s;
}

std::vector<ScoredResponse> score_batch(const std::vector<dataset::Instance>& instances,
                                        const std::vector<judge::JudgeVerdict>& verdicts,
                                        HedgeRule rule) {
  std::map<std::string, const judge::JudgeVerdict*> by_id;
  std::vector<std::string> extras;
  for (const auto& v : verdicts) {
    if (!by_id.emplace(v.instance_id, &v).second) {
      extras.push_back(v.instance_id + " (duplicate)");
    }
  }
  std::vector<std::string> missing;
  std::set<std::string> instance_ids;
  for (const auto& inst : instances) {
    instance_ids.insert(inst.id);
    if (!by_id.count(inst.id)) missing.push_back(inst.id);
  }
  for (const auto& [id, v] : by_id) {
    if (!instance_ids.count(id)) extras.push_back(id);
  }
  if (!missing.empty() || !extras.empty()) {
    std::string msg = "score_batch: join is not 1:1";
    if (!missing.empty()) msg += "; instances without verdicts: " + text::join(missing, ", ");
    if (!extras.empty()) msg += "; verdicts without instances: " + text::join(extras, ", ");
    throw DataError(msg);
  }

  std::vector<ScoredResponse> out;
  out.reserve(instances.size());
  for (const auto& inst : instances) {
    out.push_back(score(inst, *by_id.at(inst.id), rule));
  }
  return out;
}

nlohmann::json scored_to_json(const ScoredResponse& s) {
  return {{"instance_id", s.instance_id},
          {"model", s.model},
          {"language", s.language},
          {"setting", dataset::to_string(s.setting)},
          {"kind", dataset::to_string(s.kind)},
          {"category", judge::to_string(s.category)},
          {"mentions", s.mentions},
          {"judge_model", s.judge_model},
          {"correct", s.correct},
          {"direct", s.direct},
          {"preferred_met", s.preferred_met}};
}

ScoredResponse scored_from_json(const nlohmann::json& j) {
  ScoredResponse s;
  try {
    s.instance_id = j.at("instance_id").get<std::string>();
    s.model = j.at("model").get<std::string>();
    s.language = j.at("language").get<std::string>();
    s.setting = dataset::setting_from_string(j.at("setting").get<std::string>());
    s.kind = dataset::kind_from_string(j.at("kind").get<std::string>());
    s.category = judge::category_from_string(j.at("category").get<std::string>());
    s.mentions = j.at("mentions").get<std::vector<std::string>>();
    s.judge_model = j.at("judge_model").get<std::string>();
    s.correct = j.at("correct").get<bool>();
    s.direct = j.at("direct").get<bool>();
    s.preferred_met = j.at("preferred_met").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("scored row: ") + e.what());
  }
  std::sort(s.mentions.begin(), s.mentions.end());
  return s;
}

void write_scored(const std::vector<ScoredResponse>& scored, const std::filesystem::path& path) {
  std::vector<nlohmann::json> rows;
  rows.reserve(scored.size());
  for (const auto& s : scored) rows.push_back(scored_to_json(s));
  jsonl::write_file(path, rows);
}

std::vector<ScoredResponse> read_scored(const std::filesystem::path& path) {
  auto rows = jsonl::read_file(path);
  std::vector<ScoredResponse> out;
  out.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    try {
      out.push_back(scored_from_json(rows[i]));
    } catch (const DataError& e) {
      throw DataError(path.string() + ":" + std::to_string(i + 1) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace refbench::scoring
