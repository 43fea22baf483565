#include "refbench/metrics.hpp"

#include <algorithm>
#include <set>
#include <sstream>
#include <tuple>

#include "refbench/error.hpp"
#include "refbench/text.hpp"

namespace refbench::metrics {

namespace {

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out += "\"";
  return out;
}

std::string kind_label(const std::string& kind) {
  if (kind == "clearref") return "ClearRef";
  if (kind == "sharedref") return "SharedRef";
  return kind.empty() ? "all kinds" : kind;
}

std::string setting_label(const std::string& setting) {
  if (setting == "normal") return "Normal";
  if (setting == "simple") return "Simple";
  if (setting == "cot") return "CoT";
  return setting.empty() ? "all settings" : setting;
}

const std::vector<std::string>& category_names() {
  static const std::vector<std::string> names = {"answer_attempt", "clarification", "hedge",
                                                 "refuse", "missing"};
  return names;
}

}  // namespace

GroupBy GroupBy::parse(const std::vector<std::string>& keys) {
  GroupBy g{false, false, false, false};
  for (const auto& k : keys) {
    if (k == "model") g.model = true;
    else if (k == "language") g.language = true;
    else if (k == "setting") g.setting = true;
    else if (k == "kind") g.kind = true;
    else throw ConfigError("unknown group-by key '" + k + "'");
  }
  return g;
}

std::vector<MetricsCell> aggregate(const std::vector<scoring::ScoredResponse>& scored,
                                   const GroupBy& group_by) {
  if (scored.empty()) throw DataError("aggregate: no scored responses");

  std::map<std::tuple<std::string, std::string, std::string, std::string>, MetricsCell> cells;
  for (const auto& s : scored) {
    std::tuple<std::string, std::string, std::string, std::string> key{
        group_by.model ? s.model : "",
        group_by.language ? s.language : "",
        group_by.setting ? dataset::to_string(s.setting) : "",
        group_by.kind ? dataset::to_string(s.kind) : "",
    };
    auto [it, inserted] = cells.try_emplace(key);
    MetricsCell& cell = it->second;
    if (inserted) {
      std::tie(cell.model, cell.language, cell.setting, cell.kind) = key;
      for (const auto& name : category_names()) cell.category_counts[name] = 0;
    }
    cell.n += 1;
    if (s.correct) cell.n_correct += 1;
    if (s.direct) cell.n_direct += 1;
    if (s.correct && s.direct) cell.n_correct_and_direct += 1;
    cell.category_counts[judge::to_string(s.category)] += 1;
  }

  std::vector<MetricsCell> out;
  out.reserve(cells.size());
  for (auto& [key, cell] : cells) out.push_back(std::move(cell));
  return out;
}

PositionAttribution position_attribution_from_string(const std::string& s) {
  std::string t = text::to_lower_ascii(s);
  if (t == "mass_split" || t == "mass-split") return PositionAttribution::MassSplit;
  if (t == "single_mention" || t == "single-mention") return PositionAttribution::SingleMentionOnly;
  throw ConfigError("unknown position attribution '" + s +
                    "' (expected mass_split|single_mention)");
}

std::vector<PositionRow> position_selection_rates(
    const std::vector<scoring::ScoredResponse>& scored,
    const std::vector<dataset::Instance>& instances, PositionAttribution mode) {
  std::map<std::string, const dataset::Instance*> by_id;
  for (const auto& inst : instances) by_id[inst.id] = &inst;

  std::map<std::tuple<std::string, std::string, std::string>, PositionRow> rows;
  for (const auto& s : scored) {
    auto it = by_id.find(s.instance_id);
    if (it == by_id.end()) {
      throw DataError("position rates: no instance for scored id '" + s.instance_id + "'");
    }
    const dataset::Instance& inst = *it->second;
    if (s.mentions.empty()) continue;
    if (mode == PositionAttribution::SingleMentionOnly && s.mentions.size() != 1) continue;

    const auto entities = inst.combined();
    const int k = static_cast<int>(entities.size());
    std::tuple<std::string, std::string, std::string> key{
        s.model, dataset::to_string(s.setting), dataset::to_string(s.kind)};
    auto [row_it, inserted] = rows.try_emplace(key);
    PositionRow& row = row_it->second;
    if (inserted) {
      std::tie(row.model, row.setting, row.kind) = key;
      row.positions = k;
    }

    // 6 divides evenly by 1, 2 and 3 mentioned entities.
    const long long share = 6 / static_cast<long long>(s.mentions.size());
    for (const auto& mention : s.mentions) {
      auto pos = std::find(entities.begin(), entities.end(), mention);
      if (pos == entities.end()) {
        throw DataError("position rates: mention '" + mention + "' not in instance '" +
                        inst.id + "'");
      }
      const int combined_index = static_cast<int>(pos - entities.begin());
      int slot = -1;
      for (int j = 0; j < k; ++j) {
        if (inst.order[static_cast<std::size_t>(j)] == combined_index) {
          slot = j;
          break;
        }
      }
      row.units[static_cast<std::size_t>(slot)] += share;
    }
    row.n += 1;
  }

  std::vector<PositionRow> out;
  out.reserve(rows.size());
  for (auto& [key, row] : rows) out.push_back(std::move(row));
  return out;
}

double cohen_kappa(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  if (a.size() != b.size()) throw DataError("cohen_kappa: label lists differ in length");
  if (a.empty()) throw DataError("cohen_kappa: empty label lists");

  const double n = static_cast<double>(a.size());
  long long agree = 0;
  std::map<std::string, long long> count_a, count_b;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == b[i]) ++agree;
    count_a[a[i]] += 1;
    count_b[b[i]] += 1;
  }
  const double p_o = static_cast<double>(agree) / n;
  double p_e = 0.0;
  for (const auto& [label, ca] : count_a) {
    auto it = count_b.find(label);
    if (it == count_b.end()) continue;
    p_e += (static_cast<double>(ca) / n) * (static_cast<double>(it->second) / n);
  }
  // p_e = 1 only when both raters are constant on the same label, which forces
  // p_o = 1: perfect agreement by definition.
  if (1.0 - p_e < 1e-15) return 1.0;
  return (p_o - p_e) / (1.0 - p_e);
}

ReportFormat report_format_from_string(const std::string& s) {
  std::string t = text::to_lower_ascii(s);
  if (t == "csv") return ReportFormat::Csv;
  if (t == "json") return ReportFormat::Json;
  if (t == "markdown" || t == "md") return ReportFormat::Markdown;
  throw ConfigError("unknown report format '" + s + "' (expected csv|json|markdown)");
}

std::string format_pct(long long num, long long den) {
  if (den == 0) return "n/a";
  // round-half-up of 10000*num/den, exact integer arithmetic
  const long long scaled = (num * 20000 + den) / (2 * den);
  std::string frac = std::to_string(scaled % 100);
  if (frac.size() < 2) frac = "0" + frac;
  return std::to_string(scaled / 100) + "." + frac;
}

namespace {

nlohmann::json cell_json(const MetricsCell& c) {
  nlohmann::json cats;
  for (const auto& [name, count] : c.category_counts) {
    cats[name] = {{"count", count}, {"pct", format_pct(count, c.n)}};
  }
  return {{"model", c.model},
          {"language", c.language},
          {"setting", c.setting},
          {"kind", c.kind},
          {"n", c.n},
          {"n_correct", c.n_correct},
          {"n_direct", c.n_direct},
          {"n_correct_and_direct", c.n_correct_and_direct},
          {"pct_correct", format_pct(c.n_correct, c.n)},
          {"pct_direct", format_pct(c.n_direct, c.n)},
          {"pct_direct_of_correct", c.n_correct == 0
                                        ? nlohmann::json(nullptr)
                                        : nlohmann::json(format_pct(c.n_correct_and_direct,
                                                                    c.n_correct))},
          {"categories", std::move(cats)}};
}

nlohmann::json position_json(const PositionRow& r) {
  nlohmann::json rates = nlohmann::json::array();
  for (int j = 0; j < r.positions; ++j) {
    rates.push_back(format_pct(r.units[static_cast<std::size_t>(j)], 6 * r.n));
  }
  return {{"model", r.model},      {"setting", r.setting}, {"kind", r.kind},
          {"positions", r.positions}, {"n", r.n},          {"pct_by_position", std::move(rates)}};
}

std::string render_csv(const std::vector<MetricsCell>& cells,
                       const std::vector<PositionRow>& positions) {
  std::ostringstream out;
  out << "model,language,setting,kind,n,pct_correct,pct_direct,pct_direct_of_correct";
  for (const auto& name : category_names()) out << ",pct_" << name;
  out << "\n";
  for (const auto& c : cells) {
    out << csv_escape(c.model) << ',' << csv_escape(c.language) << ',' << csv_escape(c.setting)
        << ',' << csv_escape(c.kind) << ',' << c.n << ',' << format_pct(c.n_correct, c.n) << ','
        << format_pct(c.n_direct, c.n) << ','
        << (c.n_correct == 0 ? "n/a" : format_pct(c.n_correct_and_direct, c.n_correct));
    for (const auto& name : category_names()) {
      out << ',' << format_pct(c.category_counts.at(name), c.n);
    }
    out << "\n";
  }
  if (!positions.empty()) {
    out << "\nmodel,setting,kind,n,pct_position_1,pct_position_2,pct_position_3\n";
    for (const auto& r : positions) {
      out << csv_escape(r.model) << ',' << csv_escape(r.setting) << ',' << csv_escape(r.kind)
          << ',' << r.n;
      for (int j = 0; j < 3; ++j) {
        if (j < r.positions) {
          out << ',' << format_pct(r.units[static_cast<std::size_t>(j)], 6 * r.n);
        } else {
          out << ",n/a";
        }
      }
      out << "\n";
    }
  }
  return out.str();
}

std::string render_markdown(const std::vector<MetricsCell>& cells,
                            const std::vector<PositionRow>& positions) {
  std::ostringstream out;
  out << "# Evaluation report\n";

  // Matrix tables: rows = model, columns = language, one per (kind, setting).
  std::set<std::pair<std::string, std::string>> sections;
  std::set<std::string> languages;
  std::set<std::string> models;
  for (const auto& c : cells) {
    sections.insert({c.kind, c.setting});
    languages.insert(c.language);
    models.insert(c.model);
  }
  std::map<std::tuple<std::string, std::string, std::string, std::string>, const MetricsCell*>
      by_key;
  for (const auto& c : cells) by_key[{c.kind, c.setting, c.model, c.language}] = &c;

  for (const auto& [kind, setting] : sections) {
    out << "\n## " << kind_label(kind) << " — " << setting_label(setting) << "\n\n";
    out << "| Model |";
    for (const auto& lang : languages) out << ' ' << (lang.empty() ? "(all)" : lang) << " |";
    out << "\n|---|";
    for (std::size_t i = 0; i < languages.size(); ++i) out << "---|";
    out << "\n";
    for (const auto& model : models) {
      out << "| " << (model.empty() ? "(all)" : model) << " |";
      for (const auto& lang : languages) {
        auto it = by_key.find({kind, setting, model, lang});
        if (it == by_key.end()) {
          out << " — |";
        } else {
          const MetricsCell& c = *it->second;
          out << ' ' << format_pct(c.n_correct, c.n) << " / " << format_pct(c.n_direct, c.n)
              << " |";
        }
      }
      out << "\n";
    }
    out << "\n_cells: % correct / % direct (denominator: all responses in the cell)._\n";
  }

  out << "\n## Cell detail\n\n";
  out << "| Model | Language | Setting | Kind | N | Correct % | Direct % | Direct of correct % "
         "| Answer attempt % | Clarification % | Hedge % | Refuse % | Missing % |\n";
  out << "|---|---|---|---|---|---|---|---|---|---|---|---|---|\n";
  for (const auto& c : cells) {
    out << "| " << (c.model.empty() ? "(all)" : c.model) << " | "
        << (c.language.empty() ? "(all)" : c.language) << " | "
        << (c.setting.empty() ? "(all)" : c.setting) << " | "
        << (c.kind.empty() ? "(all)" : c.kind) << " | " << c.n << " | "
        << format_pct(c.n_correct, c.n) << " | " << format_pct(c.n_direct, c.n) << " | "
        << (c.n_correct == 0 ? "n/a" : format_pct(c.n_correct_and_direct, c.n_correct));
    for (const auto& name : category_names()) {
      out << " | " << format_pct(c.category_counts.at(name), c.n);
    }
    out << " |\n";
  }

  if (!positions.empty()) {
    out << "\n## Position selection rates\n\n";
    out << "| Model | Setting | Kind | N | Position 1 | Position 2 | Position 3 |\n";
    out << "|---|---|---|---|---|---|---|\n";
    for (const auto& r : positions) {
      out << "| " << r.model << " | " << r.setting << " | " << r.kind << " | " << r.n;
      for (int j = 0; j < 3; ++j) {
        if (j < r.positions) {
          out << " | " << format_pct(r.units[static_cast<std::size_t>(j)], 6 * r.n);
        } else {
          out << " | —";
        }
      }
      out << " |\n";
    }
  }
  return out.str();
}

}  // namespace

std::string render_report(const std::vector<MetricsCell>& cells,
                          const std::vector<PositionRow>& positions, ReportFormat format) {
  if (cells.empty()) throw DataError("render_report: no metrics to report");
  switch (format) {
    case ReportFormat::Csv:
      return render_csv(cells, positions);
    case ReportFormat::Json: {
      nlohmann::json doc;
      doc["cells"] = nlohmann::json::array();
      for (const auto& c : cells) doc["cells"].push_back(cell_json(c));
      doc["positions"] = nlohmann::json::array();
      for (const auto& r : positions) doc["positions"].push_back(position_json(r));
      return doc.dump(2) + "\n";
    }
    case ReportFormat::Markdown:
      return render_markdown(cells, positions);
  }
  throw ConfigError("unknown report format");
}

}  // namespace refbench::metrics
