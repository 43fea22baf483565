#pragma once

#include <atomic>
#include <filesystem>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "refbench/jsonl.hpp"
#include "refbench/kb.hpp"

namespace testutil {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    static std::atomic<unsigned> counter{0};
    static const unsigned salt = std::random_device{}();
    const fs::path base = fs::temp_directory_path();
    for (int tries = 0; tries < 64; ++tries) {
      fs::path candidate =
          base / ("refbench_test_" + std::to_string(salt) + "_" + std::to_string(counter++));
      std::error_code ec;
      if (fs::create_directory(candidate, ec)) {
        path_ = candidate;
        return;
      }
    }
    throw std::runtime_error("could not create a temp directory");
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& leaf) const { return path_ / leaf; }

 private:
  fs::path path_;
};

// Valid synthetic bank with one relation per entry of `sizes` (that many
// entities each). Canonical names are globally unique: r<rel>e<idx>.
inline refbench::kb::RelationBank make_bank(const std::vector<int>& sizes,
                                            std::vector<std::string> languages = {"en", "fr"}) {
  using namespace refbench;
  kb::RelationBank bank;
  bank.languages = std::move(languages);
  for (const auto& lang : bank.languages) {
    bank.starter[lang] = "[" + lang + "] Consider: <entities>.";
    bank.simple_suffix[lang] = "[" + lang + "] Keep it simple.";
    bank.determiners[lang] = kb::default_determiners(lang);
  }
  for (std::size_t r = 0; r < sizes.size(); ++r) {
    kb::Relation rel;
    rel.id = kb::RelationId{kb::Predicate::CapableOf, "verb" + std::to_string(r)};
    for (const auto& lang : bank.languages) {
      rel.question[lang] = "[" + lang + "] Why can it verb" + std::to_string(r) + "?";
    }
    for (int e = 0; e < sizes[r]; ++e) {
      kb::EntityRecord rec;
      rec.canonical = "r" + std::to_string(r) + "e" + std::to_string(e);
      for (const auto& lang : bank.languages) {
        std::string name = lang == "en" ? rec.canonical : rec.canonical + "_" + lang;
        rec.names[lang] = name;
        if (lang == "en") {
          rec.sentences[lang] = "The " + name + " sits in the corner.";
        } else if (lang == "fr") {
          rec.sentences[lang] = "Le " + name + " est dans le coin.";
        } else {
          rec.sentences[lang] = name + " sits in the corner.";
        }
      }
      rel.entities.push_back(std::move(rec));
    }
    bank.relations.push_back(std::move(rel));
  }
  return bank;
}

inline fs::path write_json(const fs::path& file, const nlohmann::json& value) {
  refbench::jsonl::write_json_file(file, value);
  return file;
}

// Mock provider script on disk; returns the endpoint string.
inline std::string mock_endpoint(const fs::path& file, const nlohmann::json& script) {
  refbench::jsonl::write_json_file(file, script);
  return "mock://" + file.string();
}

inline fs::path repo_path(const std::string& rel) {
  return fs::path(REFBENCH_SOURCE_DIR) / rel;
}

}  // namespace testutil
