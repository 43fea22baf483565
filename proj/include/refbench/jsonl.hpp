#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace refbench::jsonl {

// Reads a JSONL file; a malformed line raises DataError with its line number.
// Blank lines are rejected except for a single trailing newline.
std::vector<nlohmann::json> read_file(const std::filesystem::path& path);

// Writes one compact JSON object per line. nlohmann's object keys are stored
// sorted, so output is deterministic for equal inputs.
void write_file(const std::filesystem::path& path, const std::vector<nlohmann::json>& rows);

std::string dump_line(const nlohmann::json& row);

nlohmann::json parse_file(const std::filesystem::path& path);  // whole-file JSON
void write_json_file(const std::filesystem::path& path, const nlohmann::json& value);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view content);

}  // namespace refbench::jsonl
