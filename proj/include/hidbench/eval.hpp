#pragma once

// Event-level scoring: IoC -> event matching, confusion counts, precision /
// FPR / MCC, cross-dataset averages, behavioural regimes and cost totals.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "hidbench/error.hpp"
#include "hidbench/ingest.hpp"
#include "hidbench/llm/report.hpp"
#include "hidbench/llm/usage.hpp"
#include "hidbench/text.hpp"

namespace hidbench::eval {

using llm::InvestigationReport;

namespace detail {

// True when `path` equals `ioc` or ends with it at a path-component boundary.
inline bool path_matches(std::string_view path, std::string_view ioc) {
  if (ioc.empty() || path.size() < ioc.size()) return false;
  if (path == ioc) return true;
  if (!path.ends_with(ioc)) return false;
  return ioc.front() == '/' || path[path.size() - ioc.size() - 1] == '/';
}

inline bool entity_matches(const Entity& e, const InvestigationReport& r) {
  switch (e.kind) {
    case EntityKind::file:
      if (!e.path) return false;
      return std::any_of(r.ioc_files.begin(), r.ioc_files.end(),
                         [&](const std::string& ioc) { return path_matches(*e.path, ioc); });
    case EntityKind::process: {
      if (!e.path) return false;
      const auto base = text::basename(*e.path);
      return r.ioc_processes.count(base) > 0 || r.ioc_processes.count(*e.path) > 0;
    }
    case EntityKind::netflow:
      return e.remote_ip && r.ioc_ips.count(*e.remote_ip) > 0;
  }
  return false;
}

}  // namespace detail

// An event is predicted malicious iff its subject or object entity matches
// an IoC (file path / process image / remote IP) or one of its command-line
// tokens equals a process IoC.
inline std::set<std::string> match_iocs(const InvestigationReport& report, const std::vector<Event>& events,
                                        const EntityMap& entities) {
  std::set<std::string> positives;
  if (report.ioc_files.empty() && report.ioc_processes.empty() && report.ioc_ips.empty()) return positives;
  std::map<std::string, bool> memo;
  auto hit = [&](const std::string& id) {
    auto [it, fresh] = memo.emplace(id, false);
    if (fresh) {
      auto e = entities.find(id);
      it->second = e != entities.end() && detail::entity_matches(e->second, report);
    }
    return it->second;
  };
  for (const auto& ev : events) {
    bool positive = hit(ev.subject_id) || (ev.object_id && hit(*ev.object_id));
    if (!positive && ev.cmdline && !report.ioc_processes.empty()) {
      for (const auto& tok : text::split_ws(*ev.cmdline))
        if (report.ioc_processes.count(tok)) {
          positive = true;
          break;
        }
    }
    if (positive) positives.insert(ev.event_id);
  }
  return positives;
}

struct ConfusionCounts {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
  std::int64_t tn = 0;

  std::int64_t total() const noexcept { return tp + fp + fn + tn; }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

inline json to_json(const ConfusionCounts& c) {
  return json{{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}, {"tn", c.tn}};
}

// Requires predicted ⊆ window events. Malicious ids outside the window are
// ignored; the counts always partition the window.
inline ConfusionCounts compute_confusion(const std::set<std::string>& predicted, const GroundTruth& truth,
                                         const std::vector<Event>& window_events) {
  std::set<std::string> ids;
  for (const auto& ev : window_events) ids.insert(ev.event_id);
  std::vector<std::string> outside;
  for (const auto& p : predicted)
    if (!ids.count(p)) outside.push_back(p);
  if (!outside.empty()) throw ReferentialError("predicted event ids outside the window", outside);

  ConfusionCounts c;
  for (const auto& id : ids) {
    const bool pos = predicted.count(id) > 0;
    const bool mal = truth.malicious_event_ids.count(id) > 0;
    if (pos && mal) ++c.tp;
    else if (pos) ++c.fp;
    else if (mal) ++c.fn;
    else ++c.tn;
  }
  return c;
}

struct MetricSet {
  double precision = 0;
  double fpr = 0;
  double mcc = 0;
  bool no_alerts = false;  // tp + fp == 0; precision reported as 0

  double fpr_percent() const noexcept { return fpr * 100.0; }
};

// Degenerate denominators: precision -> 0 (flagged no_alerts), FPR -> 0,
// MCC -> 0 whenever any marginal is zero.
inline MetricSet compute_metrics(const ConfusionCounts& c) {
  if (c.tp < 0 || c.fp < 0 || c.fn < 0 || c.tn < 0) throw Error("confusion counts must be non-negative");
  using ld = long double;
  MetricSet m;
  const auto alerts = c.tp + c.fp;
  m.no_alerts = alerts == 0;
  m.precision = alerts ? static_cast<double>(static_cast<ld>(c.tp) / alerts) : 0.0;
  const auto benign = c.fp + c.tn;
  m.fpr = benign ? static_cast<double>(static_cast<ld>(c.fp) / benign) : 0.0;
  const ld denom = static_cast<ld>(c.tp + c.fp) * static_cast<ld>(c.tp + c.fn) *
                   static_cast<ld>(c.tn + c.fp) * static_cast<ld>(c.tn + c.fn);
  if (denom > 0) {
    const ld num = static_cast<ld>(c.tp) * c.tn - static_cast<ld>(c.fp) * c.fn;
    m.mcc = static_cast<double>(num / std::sqrt(denom));
    m.mcc = std::clamp(m.mcc, -1.0, 1.0);
  }
  return m;
}

// Arithmetic mean per metric.
inline MetricSet aggregate_metrics(std::span<const MetricSet> group) {
  if (group.empty()) throw Error("aggregate_metrics needs at least one metric set");
  MetricSet out;
  for (const auto& m : group) {
    out.precision += m.precision;
    out.fpr += m.fpr;
    out.mcc += m.mcc;
  }
  const auto n = static_cast<double>(group.size());
  out.precision /= n;
  out.fpr /= n;
  out.mcc /= n;
  return out;
}

enum class Regime { conservative, balanced, over_sensitive };

inline const char* to_string(Regime r) {
  switch (r) {
    case Regime::conservative: return "conservative";
    case Regime::balanced: return "balanced";
    case Regime::over_sensitive: return "over_sensitive";
  }
  return "?";
}

// Thresholds in percentage points of FPR.
struct RegimeThresholds {
  double conservative_avg = 0.25;
  double conservative_max = 1.0;
  double over_sensitive_avg = 0.50;
  double over_sensitive_max = 2.0;
};

struct RegimeAssignment {
  double f_avg = 0;
  double f_max = 0;
  Regime regime = Regime::balanced;
};

// Over-sensitive if either the mean or the worst-case FPR crosses its upper
// threshold; conservative if both stay under the lower ones; else balanced.
inline RegimeAssignment classify_regime(std::span<const double> fpr_percent, const RegimeThresholds& t = {}) {
  if (fpr_percent.empty()) throw Error("classify_regime needs at least one FPR value");
  RegimeAssignment a;
  for (double f : fpr_percent) {
    if (!(f >= 0)) throw Error("FPR values must be >= 0");
    a.f_avg += f;
    a.f_max = std::max(a.f_max, f);
  }
  a.f_avg /= static_cast<double>(fpr_percent.size());
  if (a.f_avg >= t.over_sensitive_avg || a.f_max >= t.over_sensitive_max)
    a.regime = Regime::over_sensitive;
  else if (a.f_avg < t.conservative_avg && a.f_max < t.conservative_max)
    a.regime = Regime::conservative;
  else
    a.regime = Regime::balanced;
  return a;
}

struct PriceTable {
  std::map<std::string, std::pair<llm::Money, llm::Money>> per_1k;  // model -> (prompt, completion)

  void add(const llm::ModelEndpoint& e) { per_1k[e.name] = {e.price_per_1k_prompt, e.price_per_1k_completion}; }
};

struct CostRow {
  std::string model;
  std::string dataset;
  std::size_t calls = 0;
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
  llm::Money total_cost;
  double total_time_s = 0;

  llm::Money mean_cost() const {
    return calls ? llm::Money::from_nanos(total_cost.nanos() / static_cast<std::int64_t>(calls)) : llm::Money{};
  }
  double mean_time_s() const { return calls ? total_time_s / static_cast<double>(calls) : 0.0; }
};

// Totals per (model, dataset), priced from `prices` (recorded costs are not
// trusted). Rows are ordered by model, then dataset.
inline std::vector<CostRow> account_costs(const std::vector<llm::LedgerEntry>& ledger, const PriceTable& prices) {
  std::map<std::pair<std::string, std::string>, CostRow> rows;
  for (const auto& e : ledger) {
    auto p = prices.per_1k.find(e.model);
    if (p == prices.per_1k.end()) throw ConfigError("model '" + e.model + "' missing from the price table");
    auto& row = rows[{e.model, e.dataset}];
    row.model = e.model;
    row.dataset = e.dataset;
    ++row.calls;
    row.prompt_tokens += e.usage.prompt_tokens;
    row.completion_tokens += e.usage.completion_tokens;
    row.total_cost += llm::token_cost(e.usage.prompt_tokens, e.usage.completion_tokens, p->second.first,
                                      p->second.second);
    row.total_time_s += e.usage.wall_time_s;
  }
  std::vector<CostRow> out;
  for (auto& [_, r] : rows) out.push_back(std::move(r));
  return out;
}

}  // namespace hidbench::eval
