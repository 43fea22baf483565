#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "refbench/dataset.hpp"
#include "refbench/judge.hpp"

namespace refbench::scoring {

// Hedge correctness: Literal credits any mentioned context entity (including
// the negative); Strict requires at least one positive.
enum class HedgeRule { Literal, Strict };

std::string to_string(HedgeRule r);
HedgeRule hedge_rule_from_string(const std::string& s);

struct ScoredResponse {
  std::string instance_id;
  std::string model;
  std::string language;
  dataset::Setting setting = dataset::Setting::Normal;
  dataset::InstanceKind kind = dataset::InstanceKind::ClearRef;
  judge::ResponseCategory category = judge::ResponseCategory::Missing;
  std::vector<std::string> mentions;  // sorted canonical names
  std::string judge_model;
  bool correct = false;
  bool direct = false;
  bool preferred_met = false;

  friend bool operator==(const ScoredResponse&, const ScoredResponse&) = default;
};

// Pure. correct: clarification -> true; hedge -> rule above; answer_attempt ->
// positives subset of mentions; refuse/missing -> false. direct: category not
// refuse/missing and mentions == positives exactly. preferred_met: SharedRef
// wants direct, ClearRef wants a correct answer_attempt.
ScoredResponse score(const dataset::Instance& instance, const judge::JudgeVerdict& verdict,
                     HedgeRule rule = HedgeRule::Literal);

// Strict 1:1 join on instance id; missing or extra verdicts raise a DataError
// listing the offending ids. Output follows the instances' order.
std::vector<ScoredResponse> score_batch(const std::vector<dataset::Instance>& instances,
                                        const std::vector<judge::JudgeVerdict>& verdicts,
                                        HedgeRule rule = HedgeRule::Literal);

nlohmann::json scored_to_json(const ScoredResponse& s);
ScoredResponse scored_from_json(const nlohmann::json& j);
void write_scored(const std::vector<ScoredResponse>& scored, const std::filesystem::path& path);
std::vector<ScoredResponse> read_scored(const std::filesystem::path& path);

}  // namespace refbench::scoring
