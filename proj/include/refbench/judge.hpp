#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "refbench/dataset.hpp"
#include "refbench/provider.hpp"

namespace refbench::judge {

enum class ResponseCategory { AnswerAttempt, Clarification, Hedge, Refuse, Missing };

std::string to_string(ResponseCategory c);
ResponseCategory category_from_string(const std::string& s);
const std::array<ResponseCategory, 5>& all_categories();

// Raw templates (embedded; golden-file tests pin them to the data/prompts
// fixtures byte-for-byte).
std::string_view classification_prompt_template();
std::string_view extraction_system_prompt();
std::string_view extraction_user_template();

std::string render_classification_prompt(const std::string& question, const std::string& answer);
// entity_list is rendered as a JSON string array, preserving order.
std::string render_extraction_user(const std::vector<std::string>& entity_list,
                                   const std::string& answer);

// First syntactically valid JSON object/array embedded anywhere in s.
std::optional<nlohmann::json> first_json_object(const std::string& s);
std::optional<nlohmann::json> first_json_array(const std::string& s);

struct ClassifyResult {
  ResponseCategory category = ResponseCategory::Missing;
  std::string raw;  // "" when the judge was not called
};

// Empty (whitespace-only) answers short-circuit to missing without an API
// call. strict_json requires the whole output to be the JSON object; otherwise
// the first object found anywhere is accepted.
ClassifyResult classify_response(provider::Provider& judge, const std::string& question,
                                 const std::string& answer, bool strict_json = false);

struct ExtractionResult {
  std::vector<std::string> matched;  // entity_list entries, list order, deduplicated
  std::vector<std::string> dropped;  // judge outputs with no list match (logged by callers)
  std::string raw;
};

// Matching is case-folded exact comparison against entity_list; the prompt
// already tells the judge to echo list spellings.
ExtractionResult extract_entities(provider::Provider& judge,
                                  const std::vector<std::string>& entity_list,
                                  const std::string& answer);

struct JudgeVerdict {
  std::string instance_id;
  std::string model;  // candidate model name
  std::string language;
  dataset::Setting setting = dataset::Setting::Normal;
  ResponseCategory category = ResponseCategory::Missing;
  std::vector<std::string> mentions;  // canonical names, sorted
  std::string judge_model;
  std::string raw_class_output;
  std::string raw_extract_output;

  friend bool operator==(const JudgeVerdict&, const JudgeVerdict&) = default;
};

// "{instance_id}#{model}#{language}#{setting}" — the join key against human
// annotation fixtures.
std::string response_id(const JudgeVerdict& v);

nlohmann::json verdict_to_json(const JudgeVerdict& v);
JudgeVerdict verdict_from_json(const nlohmann::json& j);
void write_verdicts(const std::vector<JudgeVerdict>& verdicts, const std::filesystem::path& path);
std::vector<JudgeVerdict> read_verdicts(const std::filesystem::path& path);

// One row of the human-annotation fixture (TSV: response_id, category,
// entities semicolon-joined).
struct HumanRow {
  std::string response_id;
  std::string category;
  std::vector<std::string> entities;  // sorted canonical names
};

std::vector<HumanRow> load_human_fixture(const std::filesystem::path& path);

struct AgreementReport {
  std::size_t n = 0;
  double category_accuracy = 0.0;
  double kappa = 0.0;
  double entity_exact_match = 0.0;
  // confusion[human][judge]; every category pair present (zero-filled).
  std::map<std::string, std::map<std::string, long long>> confusion;
};

// Joins 1:1 on response id (errors list unmatched ids from either side).
AgreementReport validate_against_human(const std::vector<HumanRow>& fixture,
                                       const std::vector<JudgeVerdict>& verdicts);

nlohmann::json agreement_to_json(const AgreementReport& r);

}  // namespace refbench::judge
