#include <doctest.h>

#include <fstream>

#include "refbench/error.hpp"
#include "refbench/jsonl.hpp"
#include "support/helpers.hpp"

using namespace refbench;
using nlohmann::json;

TEST_CASE("jsonl round-trips rows") {
  testutil::TempDir tmp;
  auto file = tmp / "rows.jsonl";
  std::vector<json> rows = {json{{"a", 1}}, json{{"b", "x"}, {"c", json::array({1, 2})}}};
  jsonl::write_file(file, rows);
  auto back = jsonl::read_file(file);
  CHECK(back == rows);
}

TEST_CASE("jsonl writes one line per row with a trailing newline") {
  testutil::TempDir tmp;
  auto file = tmp / "rows.jsonl";
  jsonl::write_file(file, {json{{"a", 1}}, json{{"b", 2}}});
  auto bytes = jsonl::read_text_file(file);
  CHECK(bytes == "{\"a\":1}\n{\"b\":2}\n");
}

TEST_CASE("jsonl reports malformed lines with their line number") {
  testutil::TempDir tmp;
  auto file = tmp / "bad.jsonl";
  jsonl::write_text_file(file, "{\"ok\":1}\nnot json\n");
  CHECK_THROWS_WITH_AS(jsonl::read_file(file), doctest::Contains(":2:"), DataError);
}

TEST_CASE("jsonl rejects interior blank lines, tolerates the final newline") {
  testutil::TempDir tmp;
  auto file = tmp / "gap.jsonl";
  jsonl::write_text_file(file, "{\"a\":1}\n\n{\"b\":2}\n");
  CHECK_THROWS_AS(jsonl::read_file(file), DataError);
  jsonl::write_text_file(file, "{\"a\":1}\n");
  CHECK(jsonl::read_file(file).size() == 1);
}

TEST_CASE("jsonl missing file raises a data error") {
  testutil::TempDir tmp;
  CHECK_THROWS_AS(jsonl::read_file(tmp / "absent.jsonl"), DataError);
  CHECK_THROWS_AS(jsonl::parse_file(tmp / "absent.json"), DataError);
}

TEST_CASE("dump_line emits sorted keys compactly") {
  json j;
  j["zebra"] = 1;
  j["alpha"] = 2;
  CHECK(jsonl::dump_line(j) == "{\"alpha\":2,\"zebra\":1}");
}

TEST_CASE("dump_line survives invalid utf-8 by replacement") {
  json j;
  j["raw"] = std::string("ok\xFF\xFE");
  CHECK_NOTHROW(jsonl::dump_line(j));
  auto s = jsonl::dump_line(j);
  CHECK(s.find("ok") != std::string::npos);
}

TEST_CASE("write_file creates parent directories") {
  testutil::TempDir tmp;
  auto file = tmp.path() / "deep" / "nested" / "rows.jsonl";
  jsonl::write_file(file, {json{{"a", 1}}});
  CHECK(std::filesystem::exists(file));
}

TEST_CASE("json file round-trip") {
  testutil::TempDir tmp;
  auto file = tmp / "obj.json";
  json value{{"k", json::array({1, 2, 3})}, {"s", "t"}};
  jsonl::write_json_file(file, value);
  CHECK(jsonl::parse_file(file) == value);
}

TEST_CASE("text file round-trip is binary-exact") {
  testutil::TempDir tmp;
  auto file = tmp / "t.txt";
  std::string content = "line1\nline2 no trailing newline";
  jsonl::write_text_file(file, content);
  CHECK(jsonl::read_text_file(file) == content);
}
