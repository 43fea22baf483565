// Acceptance suite: one PASS/FAIL line per shipped guarantee. Each check is
// self-contained and re-derives its expectations from first principles (hand
// tables, closed forms, scripted fixtures) rather than trusting library
// internals. Exits nonzero if any line fails.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "refbench/dataset.hpp"
#include "refbench/dpo.hpp"
#include "refbench/judge.hpp"
#include "refbench/jsonl.hpp"
#include "refbench/kb.hpp"
#include "refbench/metrics.hpp"
#include "refbench/pipeline.hpp"
#include "refbench/scoring.hpp"
#include "refbench/text.hpp"
#include "support/helpers.hpp"

using namespace refbench;
using nlohmann::json;

namespace {

int g_failures = 0;

void run(const std::string& name, const std::function<std::string()>& body) {
  try {
    std::string detail = body();
    std::cout << "PASS: " << name << " — " << detail << "\n";
  } catch (const std::exception& e) {
    ++g_failures;
    std::cout << "FAIL: " << name << " — " << e.what() << "\n";
  }
}

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

void expect(bool ok, const std::string& msg) {
  if (!ok) fail(msg);
}

double elapsed_s(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// The pipeline stages narrate progress on stdout; keep acceptance output to
// one line per criterion.
struct QuietStdout {
  std::ostringstream sink;
  std::streambuf* saved;
  QuietStdout() : saved(std::cout.rdbuf(sink.rdbuf())) {}
  ~QuietStdout() { std::cout.rdbuf(saved); }
};

dataset::Instance make_instance(dataset::InstanceKind kind, std::vector<std::string> positives,
                                std::string negative) {
  dataset::Instance inst;
  inst.kind = kind;
  inst.relation = {kb::Predicate::CapableOf, "fly"};
  inst.positives = std::move(positives);
  inst.negative = std::move(negative);
  inst.order.resize(inst.positives.size() + 1);
  for (std::size_t i = 0; i < inst.order.size(); ++i) inst.order[i] = static_cast<int>(i);
  inst.id = dataset::make_instance_id(inst.kind, inst.relation, inst.positives, inst.negative,
                                      inst.order);
  return inst;
}

judge::JudgeVerdict verdict_for(const dataset::Instance& inst, judge::ResponseCategory cat,
                                std::vector<std::string> mentions, const std::string& model = "m",
                                const std::string& language = "en",
                                dataset::Setting setting = dataset::Setting::Normal) {
  judge::JudgeVerdict v;
  v.instance_id = inst.id;
  v.model = model;
  v.language = language;
  v.setting = setting;
  v.category = cat;
  v.mentions = std::move(mentions);
  v.judge_model = "judge";
  return v;
}

// ---------------------------------------------------------------------------
// 1. Scoring-oracle equivalence: exhaustive (category x mention subset) truth
//    tables checked against a hand-transcribed copy of the scoring rules.
// ---------------------------------------------------------------------------

std::string check_scoring_tables() {
  const auto t0 = std::chrono::steady_clock::now();
  using judge::ResponseCategory;
  struct Row {
    ResponseCategory cat;
    unsigned mask;
    bool correct_literal, correct_strict, direct, preferred;
  };
  const auto AA = ResponseCategory::AnswerAttempt;
  const auto CL = ResponseCategory::Clarification;
  const auto HE = ResponseCategory::Hedge;
  const auto RE = ResponseCategory::Refuse;
  const auto MI = ResponseCategory::Missing;

  // ClearRef: entities (p, n), mask bit0 = p mentioned, bit1 = n mentioned.
  // Transcribed rules: clarification always correct; answer attempt needs the
  // positive among the mentions; hedge credits any mention (literal) or a
  // positive mention (strict); refuse/missing never.  direct = non-refusal
  // category and mentions == {p}.  ClearRef preference: correct answer attempt.
  const Row clear_rows[20] = {
      {AA, 0b00, false, false, false, false}, {AA, 0b01, true, true, true, true},
      {AA, 0b10, false, false, false, false}, {AA, 0b11, true, true, false, true},
      {CL, 0b00, true, true, false, false},   {CL, 0b01, true, true, true, false},
      {CL, 0b10, true, true, false, false},   {CL, 0b11, true, true, false, false},
      {HE, 0b00, false, false, false, false}, {HE, 0b01, true, true, true, false},
      {HE, 0b10, true, false, false, false},  {HE, 0b11, true, true, false, false},
      {RE, 0b00, false, false, false, false}, {RE, 0b01, false, false, false, false},
      {RE, 0b10, false, false, false, false}, {RE, 0b11, false, false, false, false},
      {MI, 0b00, false, false, false, false}, {MI, 0b01, false, false, false, false},
      {MI, 0b10, false, false, false, false}, {MI, 0b11, false, false, false, false},
  };
  // SharedRef: entities (a, b, n), mask bits 0/1/2.  Answer attempts need both
  // positives; direct = mentions == {a, b}; SharedRef preference: direct.
  const Row shared_rows[40] = {
      {AA, 0b000, false, false, false, false}, {AA, 0b001, false, false, false, false},
      {AA, 0b010, false, false, false, false}, {AA, 0b011, true, true, true, true},
      {AA, 0b100, false, false, false, false}, {AA, 0b101, false, false, false, false},
      {AA, 0b110, false, false, false, false}, {AA, 0b111, true, true, false, false},
      {CL, 0b000, true, true, false, false},   {CL, 0b001, true, true, false, false},
      {CL, 0b010, true, true, false, false},   {CL, 0b011, true, true, true, true},
      {CL, 0b100, true, true, false, false},   {CL, 0b101, true, true, false, false},
      {CL, 0b110, true, true, false, false},   {CL, 0b111, true, true, false, false},
      {HE, 0b000, false, false, false, false}, {HE, 0b001, true, true, false, false},
      {HE, 0b010, true, true, false, false},   {HE, 0b011, true, true, true, true},
      {HE, 0b100, true, false, false, false},  {HE, 0b101, true, true, false, false},
      {HE, 0b110, true, true, false, false},   {HE, 0b111, true, true, false, false},
      {RE, 0b000, false, false, false, false}, {RE, 0b001, false, false, false, false},
      {RE, 0b010, false, false, false, false}, {RE, 0b011, false, false, false, false},
      {RE, 0b100, false, false, false, false}, {RE, 0b101, false, false, false, false},
      {RE, 0b110, false, false, false, false}, {RE, 0b111, false, false, false, false},
      {MI, 0b000, false, false, false, false}, {MI, 0b001, false, false, false, false},
      {MI, 0b010, false, false, false, false}, {MI, 0b011, false, false, false, false},
      {MI, 0b100, false, false, false, false}, {MI, 0b101, false, false, false, false},
      {MI, 0b110, false, false, false, false}, {MI, 0b111, false, false, false, false},
  };

  auto check = [](const dataset::Instance& inst, const std::vector<std::string>& entities,
                  const Row* rows, int n, const char* label) {
    for (int i = 0; i < n; ++i) {
      const Row& r = rows[i];
      std::vector<std::string> mentions;
      for (std::size_t b = 0; b < entities.size(); ++b) {
        if (r.mask & (1u << b)) mentions.push_back(entities[b]);
      }
      auto v = verdict_for(inst, r.cat, mentions);
      auto lit = scoring::score(inst, v, scoring::HedgeRule::Literal);
      auto strict = scoring::score(inst, v, scoring::HedgeRule::Strict);
      const std::string where = std::string(label) + " row " + std::to_string(i) + " (" +
                                judge::to_string(r.cat) + ", mask " + std::to_string(r.mask) + ")";
      expect(lit.correct == r.correct_literal, where + ": literal correctness disagrees");
      expect(strict.correct == r.correct_strict, where + ": strict correctness disagrees");
      expect(lit.direct == r.direct && strict.direct == r.direct,
             where + ": directness disagrees");
      expect(lit.preferred_met == r.preferred && strict.preferred_met == r.preferred,
             where + ": preferred-style flag disagrees");
    }
  };
  const auto clear = make_instance(dataset::InstanceKind::ClearRef, {"p"}, "n");
  const auto shared = make_instance(dataset::InstanceKind::SharedRef, {"a", "b"}, "n");
  check(clear, {"p", "n"}, clear_rows, 20, "clearref");
  check(shared, {"a", "b", "n"}, shared_rows, 40, "sharedref");

  const double secs = elapsed_s(t0);
  expect(secs < 1.0, "took " + std::to_string(secs) + "s, budget 1s");
  std::ostringstream out;
  out << "60/60 truth-table rows agree under both hedge rules in " << std::fixed
      << std::setprecision(3) << secs << "s";
  return out.str();
}

// ---------------------------------------------------------------------------
// 2. Dataset counts: the shipped bank yields 52 + 227; random banks obey the
//    closed forms |ClearRef| = sum n_r and |SharedRef| = sum C(n_r, 2).
// ---------------------------------------------------------------------------

std::string check_dataset_counts() {
  const auto t0 = std::chrono::steady_clock::now();
  auto bank = kb::load_relation_bank(testutil::repo_path("data/bank.full.json"));
  const auto clear = dataset::build_clearref(bank, 0);
  const auto shared = dataset::build_sharedref(bank, 0);
  expect(clear.size() == 52, "shipped bank: expected 52 clearref, got " +
                                 std::to_string(clear.size()));
  expect(shared.size() == 227, "shipped bank: expected 227 sharedref, got " +
                                   std::to_string(shared.size()));

  std::mt19937_64 rng(2024);
  for (int round = 0; round < 100; ++round) {
    const int n_rel = 2 + static_cast<int>(rng() % 5);
    std::vector<int> sizes(n_rel);
    for (auto& s : sizes) s = 1 + static_cast<int>(rng() % 9);
    sizes[rng() % n_rel] = 2 + static_cast<int>(rng() % 8);  // ensure a pairable relation
    auto rbank = testutil::make_bank(sizes, {"en"});
    long long want_clear = 0, want_shared = 0;
    for (int s : sizes) {
      want_clear += s;
      want_shared += static_cast<long long>(s) * (s - 1) / 2;
    }
    const auto rc = dataset::build_clearref(rbank, rng());
    const auto rs = dataset::build_sharedref(rbank, rng());
    expect(static_cast<long long>(rc.size()) == want_clear,
           "round " + std::to_string(round) + ": clearref count off");
    expect(static_cast<long long>(rs.size()) == want_shared,
           "round " + std::to_string(round) + ": sharedref count != sum C(n_r,2)");
  }
  const double secs = elapsed_s(t0);
  expect(secs < 5.0, "took " + std::to_string(secs) + "s, budget 5s");
  std::ostringstream out;
  out << "shipped bank 52/227 exact; 100 random banks match the closed forms in " << std::fixed
      << std::setprecision(3) << secs << "s";
  return out.str();
}

// ---------------------------------------------------------------------------
// 3. Permutation expansion: 2!.|ClearRef| + 3!.|SharedRef| instances, every
//    ordering unique per base instance.
// ---------------------------------------------------------------------------

std::string check_permutation_expansion() {
  testutil::TempDir tmp;
  auto bank = testutil::make_bank({4, 3, 2}, {"en"});
  kb::save_relation_bank(bank, tmp / "bank.json");
  jsonl::write_json_file(tmp / "model.json", json{{"default", "x"}});
  pipeline::RunConfig cfg;
  cfg.bank = tmp / "bank.json";
  cfg.models = {provider::ModelConfig{}};
  cfg.models[0].name = "m";
  cfg.models[0].endpoint = "mock://" + (tmp / "model.json").string();
  cfg.judge = cfg.models[0];
  cfg.cache_dir = tmp / "cache";
  cfg.output_dir = tmp / "out";
  cfg.permutations = "all";
  {
    QuietStdout quiet;
    pipeline::cmd_build_dataset(cfg);
  }
  const auto clear = dataset::read_instances(cfg.output_dir / "instances" / "clearref.jsonl");
  const auto shared = dataset::read_instances(cfg.output_dir / "instances" / "sharedref.jsonl");
  const long long base_clear = 4 + 3 + 2;                  // one per entity
  const long long base_shared = 6 + 3 + 1;                 // per-relation pairs
  expect(static_cast<long long>(clear.size()) == 2 * base_clear,
         "clearref: expected 2! per base instance");
  expect(static_cast<long long>(shared.size()) == 6 * base_shared,
         "sharedref: expected 3! per base instance");

  auto group_orders = [](const std::vector<dataset::Instance>& instances, std::size_t expected) {
    std::map<std::string, std::set<std::string>> orders;  // id minus order -> order strings
    std::set<std::string> ids;
    for (const auto& inst : instances) {
      expect(ids.insert(inst.id).second, "duplicate expanded id " + inst.id);
      const auto cut = inst.id.rfind('|');
      orders[inst.id.substr(0, cut)].insert(inst.id.substr(cut + 1));
    }
    for (const auto& [base, set] : orders) {
      expect(set.size() == expected, base + ": expected " + std::to_string(expected) +
                                         " distinct orderings, got " +
                                         std::to_string(set.size()));
    }
    return orders.size();
  };
  expect(group_orders(clear, 2) == static_cast<std::size_t>(base_clear),
         "clearref base-instance count drifted under expansion");
  expect(group_orders(shared, 6) == static_cast<std::size_t>(base_shared),
         "sharedref base-instance count drifted under expansion");
  return "2!*9 + 3!*10 = 78 instances, every ordering unique per base instance";
}

// ---------------------------------------------------------------------------
// 4. Kappa correctness: hand-computed values to 1e-12, symmetry and range
//    over ten thousand random label pairs.
// ---------------------------------------------------------------------------

std::string check_kappa() {
  using metrics::cohen_kappa;
  auto close = [](double a, double b) { return std::fabs(a - b) <= 1e-12; };
  expect(close(cohen_kappa({"A", "A", "B"}, {"A", "A", "B"}), 1.0), "identical raters != 1.0");
  expect(close(cohen_kappa({"A", "A", "B", "B"}, {"A", "B", "A", "B"}), 0.0),
         "chance-level agreement != 0.0");
  // p_o = 3/4, p_e = (3/4)(1/2) + (1/4)(1/2) = 1/2 -> kappa = 1/2
  expect(close(cohen_kappa({"A", "A", "A", "B"}, {"A", "A", "B", "B"}), 0.5),
         "three-quarters agreement != 0.5");

  std::mt19937_64 rng(7);
  const char* alphabet[3] = {"x", "y", "z"};
  for (int round = 0; round < 10000; ++round) {
    const std::size_t n = 1 + rng() % 40;
    std::vector<std::string> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = alphabet[rng() % 3];
      b[i] = alphabet[rng() % 3];
    }
    const double ab = cohen_kappa(a, b);
    const double ba = cohen_kappa(b, a);
    expect(std::isfinite(ab), "kappa not finite");
    expect(std::fabs(ab - ba) <= 1e-12, "kappa not symmetric");
    expect(ab >= -1.0 - 1e-12 && ab <= 1.0 + 1e-12, "kappa outside [-1, 1]");
    expect(close(cohen_kappa(a, a), 1.0), "self-agreement != 1.0");
  }
  return "hand cases 1.0 / 0.0 / 0.5 within 1e-12; symmetry and range hold over 10^4 pairs";
}

// ---------------------------------------------------------------------------
// 5. Judge-prompt fidelity: embedded templates byte-equal to the golden
//    fixture files, including the literal '<asnwer_str>' placeholder spelling.
// ---------------------------------------------------------------------------

std::string check_prompt_fidelity() {
  const std::string classify =
      jsonl::read_text_file(testutil::repo_path("data/prompts/classify_response.txt"));
  const std::string extract_sys =
      jsonl::read_text_file(testutil::repo_path("data/prompts/extract_entities_system.txt"));
  const std::string extract_user =
      jsonl::read_text_file(testutil::repo_path("data/prompts/extract_entities_user.txt"));
  expect(judge::classification_prompt_template() == classify,
         "classification template differs from the golden fixture");
  expect(judge::extraction_system_prompt() == extract_sys,
         "extraction system prompt differs from the golden fixture");
  expect(judge::extraction_user_template() == extract_user,
         "extraction user template differs from the golden fixture");
  expect(classify.find("<asnwer_str>") != std::string::npos,
         "classification template lost the literal '<asnwer_str>' placeholder spelling");
  expect(classify.find("<answer_str>") == std::string::npos,
         "classification template must not use the corrected spelling");

  const auto rendered = judge::render_classification_prompt("Why can it fly?", "The drone can.");
  expect(rendered.find("Why can it fly?") != std::string::npos &&
             rendered.find("The drone can.") != std::string::npos,
         "classification render dropped an input");
  expect(rendered.find("_str>") == std::string::npos, "unsubstituted placeholder after render");
  const auto extraction = judge::render_extraction_user({"drum", "owl"}, "the owl");
  expect(extraction.find("[\"drum\", \"owl\"]") != std::string::npos ||
             extraction.find("[\"drum\",\"owl\"]") != std::string::npos,
         "extraction render lost the entity list");
  expect(extraction.find("_str>") == std::string::npos && extraction.find("<entity_list>") ==
                                                              std::string::npos,
         "unsubstituted placeholder after extraction render");
  return "templates byte-equal to fixtures; '<asnwer_str>' spelling preserved; renders substitute "
         "fully";
}

// ---------------------------------------------------------------------------
// 6. Offline end-to-end: scripted providers drive a 20-instance fixture to
//    exactly 50% correct / 25% direct through build -> eval -> judge -> score
//    -> report, under ten seconds, without touching the network.
// ---------------------------------------------------------------------------

std::string check_offline_end_to_end() {
  const auto t0 = std::chrono::steady_clock::now();
  testutil::TempDir tmp;
  auto bank = testutil::make_bank({4, 4}, {"en"});
  kb::save_relation_bank(bank, tmp / "bank.json");

  const auto clear = dataset::build_clearref(bank, 0);
  const auto shared = dataset::build_sharedref(bank, 0);
  expect(clear.size() == 8 && shared.size() == 12, "fixture should hold 8 + 12 instances");

  // Outcome plan: 5 direct answers, 5 clarifications, 10 refusals
  // => 10/20 correct (50%), 5/20 direct (25%).
  std::vector<const dataset::Instance*> direct = {&clear[0], &clear[1], &shared[0], &shared[1],
                                                  &shared[2]};
  std::vector<const dataset::Instance*> clarify = {&clear[2], &clear[3], &shared[3], &shared[4],
                                                   &shared[5]};
  std::vector<const dataset::Instance*> refuse = {&clear[4], &clear[5], &clear[6], &clear[7],
                                                  &shared[6], &shared[7], &shared[8], &shared[9],
                                                  &shared[10], &shared[11]};

  auto starter_of = [&](const dataset::Instance& inst) {
    auto conv = dataset::assemble_conversation(inst, bank, "en", dataset::Setting::Normal);
    return dataset::conversation_messages(conv).front().content;
  };
  auto marker_of = [](const dataset::Instance& inst) {
    return "DIRECT " + text::join(inst.positives, " and ") + " END";
  };

  json model_rules = json::array();
  json judge_rules = json::array();
  for (const auto* inst : direct) {
    model_rules.push_back(json{{"contains", json::array({starter_of(*inst)})},
                               {"response", marker_of(*inst)}});
    judge_rules.push_back(json{{"contains", json::array({"Entities: [", marker_of(*inst)})},
                               {"response", json(inst->positives).dump()}});
  }
  for (const auto* inst : clarify) {
    model_rules.push_back(json{{"contains", json::array({starter_of(*inst)})},
                               {"response", "CLARIFY which one?"}});
  }
  for (const auto* inst : refuse) {
    model_rules.push_back(json{{"contains", json::array({starter_of(*inst)})},
                               {"response", "REFUSE cannot say."}});
  }
  judge_rules.push_back(json{{"contains", json::array({"Entities: ["})}, {"response", "[]"}});
  judge_rules.push_back(json{{"contains", json::array({"single-turn conversation", "DIRECT "})},
                             {"response", R"({"response_type": "answer_attempt"})"}});
  judge_rules.push_back(json{{"contains", json::array({"single-turn conversation", "CLARIFY"})},
                             {"response", R"({"response_type": "clarification"})"}});
  judge_rules.push_back(json{{"contains", json::array({"single-turn conversation", "REFUSE"})},
                             {"response", R"({"response_type": "refuse"})"}});
  jsonl::write_json_file(tmp / "model.json", json{{"rules", model_rules}});
  jsonl::write_json_file(tmp / "judge.json", json{{"rules", judge_rules}});

  pipeline::RunConfig cfg;
  cfg.bank = tmp / "bank.json";
  cfg.languages = {"en"};
  cfg.settings = {dataset::Setting::Normal};
  cfg.models = {provider::ModelConfig{}};
  cfg.models[0].name = "cand";
  cfg.models[0].endpoint = "mock://" + (tmp / "model.json").string();
  cfg.judge = provider::ModelConfig{};
  cfg.judge.name = "judge";
  cfg.judge.endpoint = "mock://" + (tmp / "judge.json").string();
  cfg.cache_dir = tmp / "cache";
  cfg.output_dir = tmp / "out";
  expect(cfg.all_mock(), "fixture must not configure live endpoints");
  {
    QuietStdout quiet;
    pipeline::cmd_build_dataset(cfg);
    pipeline::cmd_run_eval(cfg);
    pipeline::cmd_report(cfg);
  }

  const auto scored = scoring::read_scored(cfg.output_dir / "scored" / "cand.jsonl");
  expect(scored.size() == 20, "expected 20 scored responses, got " +
                                  std::to_string(scored.size()));
  long long n_correct = 0, n_direct = 0;
  for (const auto& s : scored) {
    n_correct += s.correct ? 1 : 0;
    n_direct += s.direct ? 1 : 0;
  }
  expect(n_correct == 10, "hand count says 10 correct, scored " + std::to_string(n_correct));
  expect(n_direct == 5, "hand count says 5 direct, scored " + std::to_string(n_direct));

  metrics::GroupBy overall;
  overall.model = overall.language = overall.setting = overall.kind = false;
  const auto cells = metrics::aggregate(scored, overall);
  expect(cells.size() == 1 && cells[0].n == 20, "ungrouped aggregate should hold one 20-row cell");
  expect(metrics::format_pct(cells[0].n_correct, cells[0].n) == "50.00",
         "aggregate correct% != 50.00");
  expect(metrics::format_pct(cells[0].n_direct, cells[0].n) == "25.00",
         "aggregate direct% != 25.00");
  expect(std::filesystem::exists(cfg.output_dir / "reports" / "report.md"),
         "report stage produced no document");

  const double secs = elapsed_s(t0);
  expect(secs < 10.0, "took " + std::to_string(secs) + "s, budget 10s");
  std::ostringstream out;
  out << "20-instance fixture scored exactly 50.00% correct / 25.00% direct in " << std::fixed
      << std::setprecision(3) << secs << "s with mock providers only";
  return out.str();
}

// ---------------------------------------------------------------------------
// 7. DPO export mechanism: a synthetic fixture with a designed per-language
//    distribution of chosen categories reproduces every cell exactly,
//    including 6 generic clarification pairs per language.
// ---------------------------------------------------------------------------

std::string check_dpo_replication() {
  const std::vector<std::string> langs = {"en", "fr", "ar", "ru", "zh"};
  auto bank = testutil::make_bank({23, 3}, langs);
  const auto clear = dataset::build_clearref(bank, 0);
  const auto shared = dataset::build_sharedref(bank, 0);

  std::vector<const dataset::Instance*> shared_pool;  // relation 0: C(23,2) = 253 pairs
  for (const auto& inst : shared) {
    if (inst.relation.object == "verb0") shared_pool.push_back(&inst);
  }
  std::vector<const dataset::Instance*> clear_pool;
  for (const auto& inst : clear) {
    if (inst.relation.object == "verb0") clear_pool.push_back(&inst);
  }
  expect(shared_pool.size() == 253 && clear_pool.size() == 23, "fixture bank sized wrong");

  using judge::ResponseCategory;
  const ResponseCategory cats[3] = {ResponseCategory::AnswerAttempt, ResponseCategory::Hedge,
                                    ResponseCategory::Clarification};
  // Designed pair counts per (setting, category, language); the replication
  // target the export mechanism must reproduce cell by cell.
  const long long shared_counts[2][3][5] = {
      // normal: answer attempt / hedge / clarification
      {{64, 80, 69, 37, 53}, {106, 39, 49, 78, 57}, {58, 44, 47, 55, 47}},
      // simple
      {{112, 84, 30, 69, 76}, {21, 13, 2, 15, 31}, {4, 3, 1, 4, 1}},
  };
  // ClearRef cells exist only for Arabic: normal AA 2, normal hedge 1, simple AA 6.
  const long long clear_counts[2][3] = {{2, 1, 0}, {6, 0, 0}};

  std::vector<dpo::RunRecord> base_run, donor_runs;
  auto add_records = [&](const dataset::Instance& inst, const std::string& lang,
                         dataset::Setting setting, ResponseCategory cat) {
    auto rejected = verdict_for(inst, ResponseCategory::Refuse, {}, "base", lang, setting);
    base_run.push_back({scoring::score(inst, rejected), "[base refusal]"});
    auto chosen = verdict_for(inst, cat, inst.positives, "donor", lang, setting);
    donor_runs.push_back({scoring::score(inst, chosen), "[donor " + judge::to_string(cat) + "]"});
  };
  const dataset::Setting settings[2] = {dataset::Setting::Normal, dataset::Setting::Simple};
  for (int s = 0; s < 2; ++s) {
    for (std::size_t l = 0; l < langs.size(); ++l) {
      std::size_t next = 0;  // per (language, setting): distinct instances per cell
      for (int c = 0; c < 3; ++c) {
        for (long long k = 0; k < shared_counts[s][c][l]; ++k) {
          add_records(*shared_pool.at(next++), langs[l], settings[s], cats[c]);
        }
      }
    }
    std::size_t next = 0;
    for (int c = 0; c < 3; ++c) {
      for (long long k = 0; k < clear_counts[s][c]; ++k) {
        add_records(*clear_pool.at(next++), "ar", settings[s], cats[c]);
      }
    }
  }

  std::vector<dataset::Instance> all_instances = clear;
  all_instances.insert(all_instances.end(), shared.begin(), shared.end());
  auto pairs = dpo::build_preference_pairs(bank, all_instances, base_run, donor_runs,
                                           std::nullopt, 11);
  const auto templates =
      jsonl::parse_file(testutil::repo_path("data/clarification_seeds.json"));
  auto generic = dpo::inject_generic_clarifications(templates, langs, 6);
  pairs.insert(pairs.end(), generic.begin(), generic.end());

  std::map<std::string, dataset::InstanceKind> kind_of;
  for (const auto& inst : all_instances) kind_of[inst.id] = inst.kind;
  std::map<std::tuple<std::string, std::string, std::string, std::string>, long long> got;
  std::map<std::string, long long> generic_by_lang;
  for (const auto& p : pairs) {
    if (p.relation == "generic") {
      ++generic_by_lang[p.language];
      continue;
    }
    auto it = kind_of.find(p.instance_id);
    expect(it != kind_of.end(), "pair references unknown instance " + p.instance_id);
    ++got[{dataset::to_string(it->second), dataset::to_string(p.setting), p.language,
           judge::to_string(p.chosen_category)}];
  }

  std::map<std::tuple<std::string, std::string, std::string, std::string>, long long> want;
  for (int s = 0; s < 2; ++s) {
    for (std::size_t l = 0; l < langs.size(); ++l) {
      for (int c = 0; c < 3; ++c) {
        if (shared_counts[s][c][l] > 0) {
          want[{"sharedref", dataset::to_string(settings[s]), langs[l],
                judge::to_string(cats[c])}] = shared_counts[s][c][l];
        }
      }
    }
    for (int c = 0; c < 3; ++c) {
      if (clear_counts[s][c] > 0) {
        want[{"clearref", dataset::to_string(settings[s]), "ar", judge::to_string(cats[c])}] =
            clear_counts[s][c];
      }
    }
  }
  if (got != want) {
    for (const auto& [key, n] : want) {
      auto it = got.find(key);
      if (it == got.end() || it->second != n) {
        fail("cell (" + std::get<0>(key) + ", " + std::get<1>(key) + ", " + std::get<2>(key) +
             ", " + std::get<3>(key) + "): expected " + std::to_string(n) + ", got " +
             std::to_string(it == got.end() ? 0 : it->second));
      }
    }
    fail("unexpected extra cells in the pair layout");
  }
  for (const auto& lang : langs) {
    expect(generic_by_lang[lang] == 6, lang + ": expected 6 generic clarification pairs");
  }
  expect(pairs.size() == 1388, "expected 1388 pairs total, got " + std::to_string(pairs.size()));
  return "1388 pairs: all 33 designed cells exact, 6 generic clarification pairs per language";
}

// ---------------------------------------------------------------------------
// 8. Live-model figures: third-party accuracy tables and judge-agreement
//    values come from proprietary model endpoints and cannot be reproduced
//    offline.
//    What this suite can and does verify: the report renderer emits the same
//    table layout those figures are read from, and the README documents a
//    small live smoke run for users with API access.
// ---------------------------------------------------------------------------

std::string check_live_figures_policy() {
  const auto inst = make_instance(dataset::InstanceKind::SharedRef, {"a", "b"}, "n");
  std::vector<scoring::ScoredResponse> scored;
  for (const auto& lang : {"en", "fr"}) {
    auto v = verdict_for(inst, judge::ResponseCategory::AnswerAttempt, {"a", "b"}, "model-x",
                         lang);
    scored.push_back(scoring::score(inst, v));
  }
  const auto cells = metrics::aggregate(scored, metrics::GroupBy{});
  const auto doc = metrics::render_report(cells, {}, metrics::ReportFormat::Markdown);
  for (const char* needle : {"# Evaluation report", "## SharedRef — Normal", "| Model |", "| en |",
                             "| fr |", "## Cell detail"}) {
    expect(doc.find(needle) != std::string::npos,
           std::string("report layout lost required element '") + needle + "'");
  }

  const std::string readme = jsonl::read_text_file(testutil::repo_path("README.md"));
  expect(readme.find("ive smoke") != std::string::npos,
         "README does not document the live smoke test");
  return "live numbers (e.g. per-language correctness, judge kappa 0.916) are NOT asserted "
         "offline by design; verified instead: the report table layout those figures are read from plus a documented "
         "<= 20-instance live smoke procedure";
}

}  // namespace

int main() {
  std::cout << "acceptance: referential-ambiguity benchmark harness\n";
  run("scoring truth tables", check_scoring_tables);
  run("dataset counts", check_dataset_counts);
  run("permutation expansion", check_permutation_expansion);
  run("kappa correctness", check_kappa);
  run("judge prompt fidelity", check_prompt_fidelity);
  run("offline end-to-end", check_offline_end_to_end);
  run("dpo export mechanism", check_dpo_replication);
  run("live-model figures policy", check_live_figures_policy);
  if (g_failures > 0) {
    std::cout << g_failures << " criterion(s) failed\n";
    return 1;
  }
  std::cout << "all criteria passed\n";
  return 0;
}
