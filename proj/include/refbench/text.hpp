#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace refbench::text {

// Simple Unicode case folding over UTF-8 input. Covers ASCII, Latin-1
// Supplement, Latin Extended-A and Cyrillic, which is what the bank's five
// languages need; other codepoints pass through unchanged.
std::string fold_case(std::string_view s);

// True when `s` begins with `prefix` after case folding both sides.
bool starts_with_fold(std::string_view s, std::string_view prefix);

// Strips one leading determiner (case-insensitive) from `s`. Determiners may
// carry their own trailing space ("the ") or attach directly ("l'", Arabic
// "al-"). Returns `s` unchanged when none matches.
std::string_view strip_one_determiner(std::string_view s,
                                      const std::vector<std::string>& determiners);

std::string_view trim(std::string_view s);

std::string replace_all(std::string_view s, std::string_view from, std::string_view to);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

std::vector<std::string> split(std::string_view s, char sep);

std::string to_lower_ascii(std::string_view s);

}  // namespace refbench::text
