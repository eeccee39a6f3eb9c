#pragma once

// Metrics CSV (model, dataset, precision, mcc, fpr_percent), merged report
// tables, regime summaries and cost/runtime tables.

#include <algorithm>
#include <array>
#include <cstdlib>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "hidbench/error.hpp"
#include "hidbench/eval.hpp"
#include "hidbench/text.hpp"

namespace hidbench::report {

inline constexpr std::array<const char*, 5> kMetricsColumns = {"model", "dataset", "precision", "mcc",
                                                               "fpr_percent"};

struct MetricsRow {
  std::string model;
  std::string dataset;
  double precision = 0;
  double mcc = 0;
  double fpr_percent = 0;

  friend bool operator==(const MetricsRow&, const MetricsRow&) = default;
};

inline MetricsRow make_row(std::string model, std::string dataset, const eval::MetricSet& m) {
  return MetricsRow{std::move(model), std::move(dataset), m.precision, m.mcc, m.fpr_percent()};
}

namespace detail {

inline std::vector<std::string> split_csv(std::string_view line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

inline std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline double parse_number(const std::string& s, const std::string& src, std::size_t line,
                           const char* column) {
  const auto t = std::string(text::trim(s));
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (t.empty() || end != t.c_str() + t.size())
    throw ParseError(src, line, std::string("column '") + column + "': not a number: '" + t + "'");
  return v;
}

inline std::string pad(std::string_view s, std::size_t width, bool right = false) {
  std::string out(s);
  if (out.size() >= width) return out;
  const std::string fill(width - out.size(), ' ');
  return right ? fill + out : out + fill;
}

}  // namespace detail

// Values are written with three decimals.
inline std::string metrics_csv(const std::vector<MetricsRow>& rows) {
  std::string out;
  for (std::size_t i = 0; i < kMetricsColumns.size(); ++i) out += (i ? "," : "") + std::string(kMetricsColumns[i]);
  out += "\n";
  for (const auto& r : rows) {
    out += detail::csv_field(r.model) + "," + detail::csv_field(r.dataset) + "," + text::fixed(r.precision, 3) +
           "," + text::fixed(r.mcc, 3) + "," + text::fixed(r.fpr_percent, 3) + "\n";
  }
  return out;
}

inline std::vector<MetricsRow> parse_metrics_csv(std::string_view csv, const std::string& src = "metrics") {
  const auto lines = text::split_lines(csv);
  if (lines.empty() || text::trim(lines.front()).empty()) throw ParseError(src, 1, "missing header row");
  const auto header = detail::split_csv(lines.front());
  for (std::size_t i = 0; i < kMetricsColumns.size(); ++i) {
    if (i >= header.size())
      throw ParseError(src, 1, std::string("missing column '") + kMetricsColumns[i] + "'");
    if (text::trim(header[i]) != kMetricsColumns[i])
      throw ParseError(src, 1, "column " + std::to_string(i + 1) + ": expected '" + kMetricsColumns[i] +
                                   "', found '" + header[i] + "'");
  }
  if (header.size() > kMetricsColumns.size())
    throw ParseError(src, 1, "unexpected column '" + header[kMetricsColumns.size()] + "'");

  std::vector<MetricsRow> rows;
  for (std::size_t n = 1; n < lines.size(); ++n) {
    if (text::trim(lines[n]).empty()) continue;
    const auto f = detail::split_csv(lines[n]);
    if (f.size() != kMetricsColumns.size())
      throw ParseError(src, n + 1,
                       "expected " + std::to_string(kMetricsColumns.size()) + " fields, got " +
                           std::to_string(f.size()) +
                           (f.size() < kMetricsColumns.size()
                                ? std::string(" (missing '") + kMetricsColumns[f.size()] + "')"
                                : std::string()));
    MetricsRow r;
    r.model = std::string(text::trim(f[0]));
    r.dataset = std::string(text::trim(f[1]));
    if (r.model.empty()) throw ParseError(src, n + 1, "column 'model' is empty");
    if (r.dataset.empty()) throw ParseError(src, n + 1, "column 'dataset' is empty");
    r.precision = detail::parse_number(f[2], src, n + 1, "precision");
    r.mcc = detail::parse_number(f[3], src, n + 1, "mcc");
    r.fpr_percent = detail::parse_number(f[4], src, n + 1, "fpr_percent");
    rows.push_back(std::move(r));
  }
  return rows;
}

// Union sorted by (model, dataset). A (model, dataset) pair may appear once.
inline std::vector<MetricsRow> merge_metrics(const std::vector<std::vector<MetricsRow>>& files) {
  std::vector<MetricsRow> all;
  for (const auto& f : files) all.insert(all.end(), f.begin(), f.end());
  std::stable_sort(all.begin(), all.end(), [](const MetricsRow& a, const MetricsRow& b) {
    return std::tie(a.model, a.dataset) < std::tie(b.model, b.dataset);
  });
  for (std::size_t i = 1; i < all.size(); ++i)
    if (all[i].model == all[i - 1].model && all[i].dataset == all[i - 1].dataset)
      throw ConfigError("duplicate metrics row for model '" + all[i].model + "', dataset '" + all[i].dataset + "'");
  return all;
}

struct RegimeRow {
  std::string model;
  eval::RegimeAssignment assignment;
};

// Regimes for models that have a row for every dataset present, provided at
// least `min_datasets` datasets are present.
inline std::vector<RegimeRow> regimes(const std::vector<MetricsRow>& rows, std::size_t min_datasets = 9) {
  std::set<std::string> datasets;
  std::map<std::string, std::map<std::string, double>> fpr;
  for (const auto& r : rows) {
    datasets.insert(r.dataset);
    fpr[r.model][r.dataset] = r.fpr_percent;
  }
  std::vector<RegimeRow> out;
  if (datasets.empty() || datasets.size() < min_datasets) return out;
  for (const auto& [model, by_ds] : fpr) {
    if (by_ds.size() != datasets.size()) continue;
    std::vector<double> v;
    for (const auto& [_, f] : by_ds) v.push_back(f);
    out.push_back({model, eval::classify_regime(v)});
  }
  return out;
}

inline std::string regimes_csv(const std::vector<RegimeRow>& rows) {
  std::string out = "model,f_avg,f_max,regime\n";
  for (const auto& r : rows)
    out += detail::csv_field(r.model) + "," + text::fixed(r.assignment.f_avg, 3) + "," +
           text::fixed(r.assignment.f_max, 3) + "," + eval::to_string(r.assignment.regime) + "\n";
  return out;
}

// One line per model; per dataset a Pre / MCC / FPR(%) column group, and a
// trailing regime column when regimes are available.
inline std::string render_table(const std::vector<MetricsRow>& rows, std::size_t min_datasets = 9) {
  std::set<std::string> datasets;
  std::map<std::string, std::map<std::string, const MetricsRow*>> grid;
  for (const auto& r : rows) {
    datasets.insert(r.dataset);
    grid[r.model][r.dataset] = &r;
  }
  std::map<std::string, std::string> regime_of;
  for (const auto& rr : regimes(rows, min_datasets)) regime_of[rr.model] = eval::to_string(rr.assignment.regime);
  const bool with_regime = !regime_of.empty();

  std::vector<std::vector<std::string>> table;
  std::vector<std::string> top{""}, sub{"Model"};
  for (const auto& ds : datasets) {
    top.insert(top.end(), {ds, "", ""});
    sub.insert(sub.end(), {"Pre", "MCC", "FPR(%)"});
  }
  if (with_regime) {
    top.push_back("");
    sub.push_back("Regime");
  }
  table.push_back(top);
  table.push_back(sub);
  for (const auto& [model, by_ds] : grid) {
    std::vector<std::string> line{model};
    for (const auto& ds : datasets) {
      auto it = by_ds.find(ds);
      if (it == by_ds.end()) {
        line.insert(line.end(), {"-", "-", "-"});
        continue;
      }
      line.push_back(text::fixed(it->second->precision, 3));
      line.push_back(text::fixed(it->second->mcc, 3));
      line.push_back(text::fixed(it->second->fpr_percent, 3));
    }
    if (with_regime) {
      auto r = regime_of.find(model);
      line.push_back(r == regime_of.end() ? "-" : r->second);
    }
    table.push_back(std::move(line));
  }

  // Column widths; a dataset name spans its three metric columns.
  const std::size_t ncols = sub.size();
  std::vector<std::size_t> width(ncols, 0);
  for (std::size_t row = 1; row < table.size(); ++row)
    for (std::size_t c = 0; c < ncols; ++c) width[c] = std::max(width[c], table[row][c].size());
  for (std::size_t g = 0; g < datasets.size(); ++g) {
    const std::size_t c = 1 + 3 * g;
    const std::size_t span = width[c] + width[c + 1] + width[c + 2] + 4;
    if (top[c].size() > span) width[c + 2] += top[c].size() - span;
  }

  std::string out;
  for (std::size_t row = 0; row < table.size(); ++row) {
    std::string line;
    for (std::size_t c = 0; c < ncols; ++c) {
      if (row == 0 && c >= 1 && c < 1 + 3 * datasets.size()) {
        if ((c - 1) % 3 != 0) continue;
        const std::size_t span = width[c] + width[c + 1] + width[c + 2] + 4;
        line += " | " + detail::pad(table[row][c], span);
        continue;
      }
      const bool numeric = row >= 2 && c >= 1 && c < 1 + 3 * datasets.size();
      line += (c == 0 ? "" : " | ") + detail::pad(table[row][c], width[c], numeric);
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + "\n";
  }
  return out;
}

inline std::string costs_csv(const std::vector<eval::CostRow>& rows) {
  std::string out =
      "model,dataset,calls,prompt_tokens,completion_tokens,total_cost,mean_cost_per_call,total_time_s,"
      "mean_time_s\n";
  for (const auto& r : rows)
    out += detail::csv_field(r.model) + "," + detail::csv_field(r.dataset) + "," + std::to_string(r.calls) + "," +
           std::to_string(r.prompt_tokens) + "," + std::to_string(r.completion_tokens) + "," +
           r.total_cost.to_string() + "," + r.mean_cost().to_string() + "," + text::fixed(r.total_time_s, 3) +
           "," + text::fixed(r.mean_time_s(), 3) + "\n";
  return out;
}

// Models as rows, one "Cost/File ($) | Time (s)" pair per dataset; a file is
// one window investigated end to end, so the pair is the run total.
inline std::string render_cost_table(const std::vector<eval::CostRow>& rows) {
  std::set<std::string> datasets;
  std::map<std::string, std::map<std::string, const eval::CostRow*>> grid;
  for (const auto& r : rows) {
    datasets.insert(r.dataset);
    grid[r.model][r.dataset] = &r;
  }
  std::vector<std::vector<std::string>> table;
  std::vector<std::string> top{""}, sub{"Model"};
  for (const auto& ds : datasets) {
    top.insert(top.end(), {ds, ""});
    sub.insert(sub.end(), {"Cost/File ($)", "Time (s)"});
  }
  table.push_back(top);
  table.push_back(sub);
  for (const auto& [model, by_ds] : grid) {
    std::vector<std::string> line{model};
    for (const auto& ds : datasets) {
      auto it = by_ds.find(ds);
      if (it == by_ds.end()) {
        line.insert(line.end(), {"-", "-"});
        continue;
      }
      line.push_back(it->second->total_cost.to_string());
      line.push_back(text::fixed(it->second->total_time_s, 2));
    }
    table.push_back(std::move(line));
  }
  std::vector<std::size_t> width(sub.size(), 0);
  for (const auto& row : table)
    for (std::size_t c = 0; c < row.size(); ++c)
      if (!(&row == &table.front() && c > 0)) width[c] = std::max(width[c], row[c].size());
  for (std::size_t g = 0; g < datasets.size(); ++g) {
    const std::size_t c = 1 + 2 * g;
    const std::size_t span = width[c] + width[c + 1] + 3;
    if (top[c].size() > span) width[c + 1] += top[c].size() - span;
  }
  std::string out;
  for (std::size_t row = 0; row < table.size(); ++row) {
    std::string line;
    for (std::size_t c = 0; c < sub.size(); ++c) {
      if (row == 0 && c >= 1) {
        if ((c - 1) % 2 != 0) continue;
        line += " | " + detail::pad(table[row][c], width[c] + width[c + 1] + 3);
        continue;
      }
      line += (c == 0 ? "" : " | ") + detail::pad(table[row][c], width[c], row >= 2 && c >= 1);
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + "\n";
  }
  return out;
}

}  // namespace hidbench::report
