#include "refbench/judge.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "refbench/error.hpp"
#include "refbench/jsonl.hpp"
#include "refbench/metrics.hpp"
#include "refbench/text.hpp"

namespace refbench::judge {

namespace {

#include "judge_prompts.inc"

// Scans for the first balanced {...} / [...] span that parses as JSON.
std::optional<nlohmann::json> first_json_span(const std::string& s, char open, char close) {
  for (std::size_t start = s.find(open); start != std::string::npos;
       start = s.find(open, start + 1)) {
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (std::size_t i = start; i < s.size(); ++i) {
      char c = s[i];
      if (in_string) {
        if (escaped) {
          escaped = false;
        } else if (c == '\\') {
          escaped = true;
        } else if (c == '"') {
          in_string = false;
        }
        continue;
      }
      if (c == '"') {
        in_string = true;
      } else if (c == open) {
        ++depth;
      } else if (c == close) {
        --depth;
        if (depth == 0) {
          auto candidate = s.substr(start, i - start + 1);
          auto parsed = nlohmann::json::parse(candidate, nullptr, /*allow_exceptions=*/false);
          if (!parsed.is_discarded()) return parsed;
          break;  // balanced but invalid; try the next opener
        }
      }
    }
  }
  return std::nullopt;
}

// Fallback for extraction outputs that are not a JSON array: split into
// name-sized tokens and strip list furniture.
std::vector<std::string> tokenize_candidates(const std::string& raw) {
  std::vector<std::string> tokens;
  std::string current;
  for (char c : raw) {
    if (c == '\n' || c == ',' || c == ';') {
      tokens.push_back(current);
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  tokens.push_back(current);

  std::vector<std::string> out;
  for (auto& t : tokens) {
    std::string_view v = text::trim(t);
    while (!v.empty() && (v.front() == '-' || v.front() == '*' || v.front() == '.')) {
      v.remove_prefix(1);
      v = text::trim(v);
    }
    // "1. name" style enumerators
    std::size_t d = 0;
    while (d < v.size() && v[d] >= '0' && v[d] <= '9') ++d;
    if (d > 0 && d < v.size() && (v[d] == '.' || v[d] == ')')) {
      v.remove_prefix(d + 1);
      v = text::trim(v);
    }
    while (!v.empty() && (v.front() == '"' || v.front() == '\'')) v.remove_prefix(1);
    while (!v.empty() && (v.back() == '"' || v.back() == '\'' || v.back() == '.')) {
      v.remove_suffix(1);
    }
    v = text::trim(v);
    if (!v.empty()) out.emplace_back(v);
  }
  return out;
}

}  // namespace

std::string to_string(ResponseCategory c) {
  switch (c) {
    case ResponseCategory::AnswerAttempt: return "answer_attempt";
    case ResponseCategory::Clarification: return "clarification";
    case ResponseCategory::Hedge: return "hedge";
    case ResponseCategory::Refuse: return "refuse";
    case ResponseCategory::Missing: return "missing";
  }
  throw DataError("unknown response category value");
}

ResponseCategory category_from_string(const std::string& s) {
  std::string t = text::to_lower_ascii(s);
  if (t == "answer_attempt") return ResponseCategory::AnswerAttempt;
  if (t == "clarification") return ResponseCategory::Clarification;
  if (t == "hedge") return ResponseCategory::Hedge;
  if (t == "refuse") return ResponseCategory::Refuse;
  if (t == "missing") return ResponseCategory::Missing;
  throw DataError("unknown response category '" + s + "'");
}

const std::array<ResponseCategory, 5>& all_categories() {
  static const std::array<ResponseCategory, 5> cats = {
      ResponseCategory::AnswerAttempt, ResponseCategory::Clarification, ResponseCategory::Hedge,
      ResponseCategory::Refuse, ResponseCategory::Missing};
  return cats;
}

std::string_view classification_prompt_template() { return kClassifyPromptTemplate; }
std::string_view extraction_system_prompt() { return kExtractSystemPrompt; }
std::string_view extraction_user_template() { return kExtractUserTemplate; }

std::string render_classification_prompt(const std::string& question, const std::string& answer) {
  std::string out = text::replace_all(kClassifyPromptTemplate, "<question_str>", question);
  return text::replace_all(out, "<asnwer_str>", answer);
}

std::string render_extraction_user(const std::vector<std::string>& entity_list,
                                   const std::string& answer) {
  std::string out = text::replace_all(extraction_user_template(), "<entity_list>",
                                      nlohmann::json(entity_list).dump());
  return text::replace_all(out, "<answer_str>", answer);
}

std::optional<nlohmann::json> first_json_object(const std::string& s) {
  return first_json_span(s, '{', '}');
}

std::optional<nlohmann::json> first_json_array(const std::string& s) {
  return first_json_span(s, '[', ']');
}

ClassifyResult classify_response(provider::Provider& judge, const std::string& question,
                                 const std::string& answer, bool strict_json) {
  if (text::trim(answer).empty()) {
    return {ResponseCategory::Missing, ""};
  }
  const auto response =
      judge.complete({{"user", render_classification_prompt(question, answer)}});

  std::optional<nlohmann::json> obj;
  if (strict_json) {
    auto parsed = nlohmann::json::parse(std::string(text::trim(response.text)), nullptr,
                                        /*allow_exceptions=*/false);
    if (parsed.is_object()) obj = std::move(parsed);
  } else {
    obj = first_json_object(response.text);
  }
  if (!obj || !obj->is_object() || !obj->contains("response_type") ||
      !(*obj)["response_type"].is_string()) {
    throw JudgeParseError("judge classification output has no response_type JSON object",
                          response.text);
  }
  try {
    return {category_from_string((*obj)["response_type"].get<std::string>()), response.text};
  } catch (const DataError&) {
    throw JudgeParseError("judge classification returned an unknown category tag",
                          response.text);
  }
}

ExtractionResult extract_entities(provider::Provider& judge,
                                  const std::vector<std::string>& entity_list,
                                  const std::string& answer) {
  if (entity_list.empty()) {
    throw DataError("extract_entities: entity list is empty");
  }
  if (text::trim(answer).empty()) {
    return {{}, {}, ""};
  }
  const auto response = judge.complete({
      {"system", std::string(extraction_system_prompt())},
      {"user", render_extraction_user(entity_list, answer)},
  });

  std::vector<std::string> candidates;
  if (auto arr = first_json_array(response.text); arr && arr->is_array()) {
    bool all_strings = std::all_of(arr->begin(), arr->end(),
                                   [](const nlohmann::json& v) { return v.is_string(); });
    if (all_strings) {
      for (const auto& v : *arr) candidates.push_back(v.get<std::string>());
    }
  }
  if (candidates.empty()) {
    candidates = tokenize_candidates(response.text);
  }

  std::vector<std::string> folded_list;
  folded_list.reserve(entity_list.size());
  for (const auto& e : entity_list) folded_list.push_back(text::fold_case(e));

  std::set<std::size_t> hit;
  ExtractionResult result;
  result.raw = response.text;
  for (const auto& cand : candidates) {
    const std::string f = text::fold_case(std::string(text::trim(cand)));
    bool matched = false;
    for (std::size_t i = 0; i < folded_list.size(); ++i) {
      if (f == folded_list[i]) {
        hit.insert(i);
        matched = true;
        break;
      }
    }
    if (!matched) result.dropped.push_back(cand);
  }
  for (std::size_t i = 0; i < entity_list.size(); ++i) {
    if (hit.count(i)) result.matched.push_back(entity_list[i]);
  }
  return result;
}

std::string response_id(const JudgeVerdict& v) {
  return v.instance_id + "#" + v.model + "#" + v.language + "#" + dataset::to_string(v.setting);
}

nlohmann::json verdict_to_json(const JudgeVerdict& v) {
  return {{"instance_id", v.instance_id},
          {"model", v.model},
          {"language", v.language},
          {"setting", dataset::to_string(v.setting)},
          {"category", to_string(v.category)},
          {"mentions", v.mentions},
          {"judge_model", v.judge_model}};
}

JudgeVerdict verdict_from_json(const nlohmann::json& j) {
  JudgeVerdict v;
  try {
    v.instance_id = j.at("instance_id").get<std::string>();
    v.model = j.at("model").get<std::string>();
    v.language = j.at("language").get<std::string>();
    v.setting = dataset::setting_from_string(j.at("setting").get<std::string>());
    v.category = category_from_string(j.at("category").get<std::string>());
    v.mentions = j.at("mentions").get<std::vector<std::string>>();
    v.judge_model = j.at("judge_model").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("verdict: ") + e.what());
  }
  std::sort(v.mentions.begin(), v.mentions.end());
  return v;
}

void write_verdicts(const std::vector<JudgeVerdict>& verdicts,
                    const std::filesystem::path& path) {
  std::vector<nlohmann::json> rows;
  rows.reserve(verdicts.size());
  for (const auto& v : verdicts) rows.push_back(verdict_to_json(v));
  jsonl::write_file(path, rows);
}

std::vector<JudgeVerdict> read_verdicts(const std::filesystem::path& path) {
  std::vector<JudgeVerdict> out;
  auto rows = jsonl::read_file(path);
  out.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    try {
      out.push_back(verdict_from_json(rows[i]));
    } catch (const DataError& e) {
      throw DataError(path.string() + ":" + std::to_string(i + 1) + ": " + e.what());
    }
  }
  return out;
}

std::vector<HumanRow> load_human_fixture(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + ": empty fixture");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "response_id\tcategory\tentities") {
    throw DataError(path.string() + ": expected header 'response_id\\tcategory\\tentities'");
  }
  std::vector<HumanRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cols = text::split(line, '\t');
    if (cols.size() != 3) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected 3 columns");
    }
    HumanRow row;
    row.response_id = cols[0];
    row.category = cols[1];
    try {
      category_from_string(row.category);
    } catch (const DataError& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    for (const auto& part : text::split(cols[2], ';')) {
      std::string name(text::trim(part));
      if (!name.empty()) row.entities.push_back(std::move(name));
    }
    std::sort(row.entities.begin(), row.entities.end());
    rows.push_back(std::move(row));
  }
  return rows;
}

AgreementReport validate_against_human(const std::vector<HumanRow>& fixture,
                                       const std::vector<JudgeVerdict>& verdicts) {
  std::map<std::string, const JudgeVerdict*> by_id;
  for (const auto& v : verdicts) {
    if (!by_id.emplace(response_id(v), &v).second) {
      throw DataError("duplicate verdict for response id " + response_id(v));
    }
  }

  std::vector<std::string> unmatched;
  std::set<std::string> used;
  std::vector<std::string> human_labels, judge_labels;
  std::size_t exact_entities = 0;

  AgreementReport report;
  for (const auto& a : all_categories()) {
    for (const auto& b : all_categories()) {
      report.confusion[to_string(a)][to_string(b)] = 0;
    }
  }

  for (const auto& row : fixture) {
    auto it = by_id.find(row.response_id);
    if (it == by_id.end()) {
      unmatched.push_back(row.response_id);
      continue;
    }
    used.insert(row.response_id);
    const JudgeVerdict& v = *it->second;
    human_labels.push_back(text::to_lower_ascii(row.category));
    judge_labels.push_back(to_string(v.category));
    report.confusion[human_labels.back()][judge_labels.back()] += 1;
    std::vector<std::string> mentions = v.mentions;  // stored sorted; defensive
    std::sort(mentions.begin(), mentions.end());
    if (mentions == row.entities) ++exact_entities;
  }
  for (const auto& [id, v] : by_id) {
    if (!used.count(id)) unmatched.push_back(id);
  }
  if (!unmatched.empty()) {
    std::sort(unmatched.begin(), unmatched.end());
    throw DataError("human fixture and verdicts do not join 1:1; unmatched: " +
                    text::join(unmatched, ", "));
  }
  if (fixture.empty()) throw DataError("human fixture has no rows");

  report.n = fixture.size();
  std::size_t agree = 0;
  for (std::size_t i = 0; i < human_labels.size(); ++i) {
    if (human_labels[i] == judge_labels[i]) ++agree;
  }
  report.category_accuracy = static_cast<double>(agree) / static_cast<double>(report.n);
  report.kappa = metrics::cohen_kappa(human_labels, judge_labels);
  report.entity_exact_match =
      static_cast<double>(exact_entities) / static_cast<double>(report.n);
  return report;
}

nlohmann::json agreement_to_json(const AgreementReport& r) {
  return {{"n", r.n},
          {"category_accuracy", r.category_accuracy},
          {"kappa", r.kappa},
          {"entity_exact_match", r.entity_exact_match},
          {"confusion", r.confusion}};
}

}  // namespace refbench::judge
