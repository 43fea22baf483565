#include <doctest.h>

#include "refbench/error.hpp"
#include "refbench/kb.hpp"
#include "support/helpers.hpp"

using namespace refbench;

TEST_CASE("relation id renders as 'Predicate object'") {
  kb::RelationId id{kb::Predicate::CapableOf, "fly"};
  CHECK(id.str() == "CapableOf fly");
  CHECK(kb::RelationId{kb::Predicate::MadeOf, "metal"}.str() == "MadeOf metal");
}

TEST_CASE("predicate strings round-trip; unknown predicate rejected") {
  for (auto p : {kb::Predicate::CapableOf, kb::Predicate::HasProperty, kb::Predicate::MadeOf}) {
    CHECK(kb::predicate_from_string(kb::to_string(p)) == p);
  }
  CHECK_THROWS_AS(kb::predicate_from_string("RelatedTo"), DataError);
}

TEST_CASE("default determiners") {
  CHECK(kb::default_determiners("en") == std::vector<std::string>{"the ", "a ", "an "});
  CHECK(kb::default_determiners("zh").empty());
  CHECK(kb::default_determiners("ru").empty());
  CHECK(kb::default_determiners("ar") == std::vector<std::string>{"ال"});
}

TEST_CASE("cot suffix falls back per language, then English, then the default") {
  kb::RelationBank bank;
  CHECK(kb::cot_suffix_for(bank, "fr") == std::string(kb::kDefaultCotSuffix));
  bank.cot_suffix["en"] = "EN suffix";
  CHECK(kb::cot_suffix_for(bank, "fr") == "EN suffix");
  bank.cot_suffix["fr"] = "FR suffix";
  CHECK(kb::cot_suffix_for(bank, "fr") == "FR suffix");
  CHECK(kb::cot_suffix_for(bank, "zh") == "EN suffix");
}

TEST_CASE("context sentence validation strips one determiner then matches the name") {
  kb::EntityRecord owl;
  owl.canonical = "owl";
  owl.names["en"] = "owl";
  owl.sentences["en"] = "The owl hunts at night.";
  auto dets = kb::default_determiners("en");
  CHECK(kb::validate_context_sentence(owl, "en", dets).status == kb::SentenceCheck::Ok);

  kb::EntityRecord drum;
  drum.canonical = "drum";
  drum.names["en"] = "drum";
  drum.sentences["en"] = "Percussion instruments are loud.";
  auto bad = kb::validate_context_sentence(drum, "en", dets);
  CHECK(bad.status == kb::SentenceCheck::PrefixMismatch);
  CHECK(bad.detail.find("drum") != std::string::npos);

  kb::EntityRecord missing;
  missing.canonical = "ghost";
  missing.names["en"] = "ghost";
  CHECK(kb::validate_context_sentence(missing, "en", dets).status ==
        kb::SentenceCheck::MissingSentence);
}

TEST_CASE("context sentence validation handles the Arabic article prefix") {
  kb::EntityRecord ent;
  ent.canonical = "helicopter";
  ent.names["ar"] = "مروحية";
  ent.sentences["ar"] = "المروحية من الأشياء التي تطير.";
  CHECK(kb::validate_context_sentence(ent, "ar", kb::default_determiners("ar")).status ==
        kb::SentenceCheck::Ok);
}

TEST_CASE("a generated bank validates") {
  auto bank = testutil::make_bank({3, 2});
  CHECK_NOTHROW(kb::validate_bank(bank));
  CHECK(bank.entity_count() == 5);
  CHECK(bank.find(kb::RelationId{kb::Predicate::CapableOf, "verb0"}) != nullptr);
  CHECK(bank.find(kb::RelationId{kb::Predicate::CapableOf, "nope"}) == nullptr);
}

TEST_CASE("bank validation rejects structural violations") {
  SUBCASE("starter without the entities placeholder") {
    auto bank = testutil::make_bank({2, 2});
    bank.starter["en"] = "no slot here";
    CHECK_THROWS_WITH_AS(kb::validate_bank(bank), doctest::Contains("<entities>"), DataError);
  }
  SUBCASE("duplicate relation id") {
    auto bank = testutil::make_bank({2, 2});
    bank.relations[1].id = bank.relations[0].id;
    CHECK_THROWS_WITH_AS(kb::validate_bank(bank), doctest::Contains("duplicate"), DataError);
  }
  SUBCASE("object must be a lowercase token") {
    auto bank = testutil::make_bank({2, 2});
    bank.relations[0].id.object = "Fly High";
    CHECK_THROWS_AS(kb::validate_bank(bank), DataError);
  }
  SUBCASE("duplicate entity within a relation") {
    auto bank = testutil::make_bank({2, 2});
    bank.relations[0].entities[1].canonical = bank.relations[0].entities[0].canonical;
    CHECK_THROWS_WITH_AS(kb::validate_bank(bank), doctest::Contains("duplicate entity"), DataError);
  }
  SUBCASE("reserved characters in canonical names") {
    auto bank = testutil::make_bank({2, 2});
    bank.relations[0].entities[0].canonical = "bad|name";
    CHECK_THROWS_WITH_AS(kb::validate_bank(bank), doctest::Contains("reserved"), DataError);
  }
  SUBCASE("question must not carry the entities placeholder") {
    auto bank = testutil::make_bank({2, 2});
    bank.relations[0].question["en"] = "Why can <entities> fly?";
    CHECK_THROWS_AS(kb::validate_bank(bank), DataError);
  }
  SUBCASE("missing coverage is aggregated into one report") {
    auto bank = testutil::make_bank({2, 2});
    bank.relations[0].entities[0].names.erase("fr");
    bank.relations[1].question.erase("en");
    CHECK_THROWS_WITH_AS(kb::validate_bank(bank), doctest::Contains("missing language coverage"),
                         DataError);
  }
  SUBCASE("sentence not starting with the name") {
    auto bank = testutil::make_bank({2, 2});
    bank.relations[0].entities[0].sentences["en"] = "Something else entirely.";
    CHECK_THROWS_WITH_AS(kb::validate_bank(bank), doctest::Contains("does not begin"), DataError);
  }
  SUBCASE("no relations") {
    auto bank = testutil::make_bank({2});
    bank.relations.clear();
    CHECK_THROWS_AS(kb::validate_bank(bank), DataError);
  }
  SUBCASE("relation without entities") {
    auto bank = testutil::make_bank({2, 2});
    bank.relations[1].entities.clear();
    CHECK_THROWS_AS(kb::validate_bank(bank), DataError);
  }
}

TEST_CASE("cross-relation reuse requires multi_relation everywhere") {
  auto bank = testutil::make_bank({2, 2});
  // copy entity r0e0 into relation 1 under the same canonical name
  auto copy = bank.relations[0].entities[0];
  bank.relations[1].entities.push_back(copy);
  CHECK_THROWS_WITH_AS(kb::validate_bank(bank), doctest::Contains("multi_relation"), DataError);
  bank.relations[1].entities.back().multi_relation = true;
  CHECK_THROWS_AS(kb::validate_bank(bank), DataError);  // still one occurrence unflagged
  bank.relations[0].entities[0].multi_relation = true;
  CHECK_NOTHROW(kb::validate_bank(bank));
}

TEST_CASE("bank json round-trip is the identity") {
  auto bank = testutil::make_bank({3, 2}, {"en", "fr", "ar"});
  auto back = kb::bank_from_json(kb::bank_to_json(bank));
  CHECK(back == bank);
}

TEST_CASE("bank file round-trip through save and load") {
  testutil::TempDir tmp;
  auto bank = testutil::make_bank({2, 3});
  kb::save_relation_bank(bank, tmp / "bank.json");
  auto back = kb::load_relation_bank(tmp / "bank.json");
  CHECK(back == bank);
}

TEST_CASE("bank parser names the missing piece") {
  CHECK_THROWS_WITH_AS(kb::bank_from_json(nlohmann::json::array()), doctest::Contains("object"),
                       DataError);
  nlohmann::json j{{"languages", {"en"}}};
  CHECK_THROWS_WITH_AS(kb::bank_from_json(j), doctest::Contains("starter"), DataError);
}

TEST_CASE("the shipped full bank loads with the expected shape") {
  auto bank = kb::load_relation_bank(testutil::repo_path("data/bank.full.json"));
  CHECK(bank.languages == std::vector<std::string>{"en", "fr", "ar", "ru", "zh"});
  CHECK(bank.relations.size() == 8);
  CHECK(bank.entity_count() == 52);
  std::vector<std::size_t> sizes;
  for (const auto& r : bank.relations) sizes.push_back(r.entities.size());
  CHECK(sizes == std::vector<std::size_t>{17, 10, 7, 5, 4, 3, 3, 3});
  CHECK(kb::cot_suffix_for(bank, "zh") == std::string(kb::kDefaultCotSuffix));
  auto fly = bank.find(kb::RelationId{kb::Predicate::CapableOf, "fly"});
  REQUIRE(fly != nullptr);
  CHECK(fly->entities.size() == 17);
  CHECK(fly->entities.front().canonical == "helicopter");
}
