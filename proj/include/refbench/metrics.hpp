#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "refbench/scoring.hpp"

namespace refbench::metrics {

struct GroupBy {
  bool model = true;
  bool language = true;
  bool setting = true;
  bool kind = true;

  // keys drawn from {model, language, setting, kind}; unknown key -> ConfigError
  static GroupBy parse(const std::vector<std::string>& keys);
};

// Exact counts; percentages are derived only at render time (2 decimals,
// half-up). Ungrouped dimensions hold "".
struct MetricsCell {
  std::string model;
  std::string language;
  std::string setting;
  std::string kind;
  long long n = 0;
  long long n_correct = 0;
  long long n_direct = 0;
  long long n_correct_and_direct = 0;
  std::map<std::string, long long> category_counts;  // all five categories present

  friend bool operator==(const MetricsCell&, const MetricsCell&) = default;
};

// Cells sorted by (model, language, setting, kind). Empty input is an error.
std::vector<MetricsCell> aggregate(const std::vector<scoring::ScoredResponse>& scored,
                                   const GroupBy& group_by);

// How multi-mention responses attribute mass to presentation positions.
enum class PositionAttribution { MassSplit, SingleMentionOnly };

PositionAttribution position_attribution_from_string(const std::string& s);

// Mass accounting in exact sixths (every mention count 1..3 divides 6), so the
// rates carry no float error until render.
struct PositionRow {
  std::string model;
  std::string setting;
  std::string kind;
  int positions = 0;  // 2 for clearref, 3 for sharedref
  long long n = 0;    // responses counted into the denominator
  std::array<long long, 3> units{};  // sixth-units of mass per position slot

  friend bool operator==(const PositionRow&, const PositionRow&) = default;
};

std::vector<PositionRow> position_selection_rates(
    const std::vector<scoring::ScoredResponse>& scored,
    const std::vector<dataset::Instance>& instances,
    PositionAttribution mode = PositionAttribution::MassSplit);

// Two-rater kappa with chance agreement from the product of marginals. The
// identical-constant degenerate case (p_e = 1) is defined as 1.0.
double cohen_kappa(const std::vector<std::string>& a, const std::vector<std::string>& b);

enum class ReportFormat { Csv, Json, Markdown };

ReportFormat report_format_from_string(const std::string& s);

// Percentage 100*num/den rendered with 2 decimals, integer half-up rounding.
// den == 0 renders as "n/a".
std::string format_pct(long long num, long long den);

// Deterministic document; markdown mirrors the results-table layout
// (rows = model, columns = language, one table per kind x setting).
std::string render_report(const std::vector<MetricsCell>& cells,
                          const std::vector<PositionRow>& positions, ReportFormat format);

}  // namespace refbench::metrics
