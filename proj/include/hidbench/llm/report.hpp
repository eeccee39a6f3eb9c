#pragma once

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "hidbench/text.hpp"

namespace hidbench::llm {

using json = nlohmann::json;

struct KeyStep {
  std::string tactic;
  std::string description;

  friend bool operator==(const KeyStep&, const KeyStep&) = default;
};

enum class IocCategory { ip, process, file };

struct InvestigationReport {
  std::string narrative;
  std::vector<KeyStep> key_steps;
  std::set<std::string> ioc_ips;
  std::set<std::string> ioc_processes;
  std::set<std::string> ioc_files;

  std::set<std::string>& iocs(IocCategory c) {
    return c == IocCategory::ip ? ioc_ips : c == IocCategory::process ? ioc_processes : ioc_files;
  }
  const std::set<std::string>& iocs(IocCategory c) const {
    return c == IocCategory::ip ? ioc_ips : c == IocCategory::process ? ioc_processes : ioc_files;
  }

  friend bool operator==(const InvestigationReport&, const InvestigationReport&) = default;
};

inline constexpr IocCategory kIocCategories[] = {IocCategory::ip, IocCategory::process,
                                                 IocCategory::file};

inline bool is_none_marker(std::string_view s) {
  const auto t = text::lower(text::trim(s));
  return t.empty() || t == "-" || t == "n/a" || t == "na" || t.rfind("none", 0) == 0 ||
         t.rfind("no ", 0) == 0 || t == "no";
}

// Trims, strips wrapping quotes/backticks and trailing list punctuation, and
// for paths collapses repeated separators and drops a trailing slash.
// Returns nullopt when nothing meaningful remains.
inline std::optional<std::string> normalize_ioc(std::string_view raw, IocCategory cat) {
  std::string s(text::trim(raw));
  bool changed = true;
  while (changed && !s.empty()) {
    changed = false;
    while (!s.empty() && (s.back() == ',' || s.back() == ';')) {
      s.pop_back();
      changed = true;
    }
    if (s.size() >= 2) {
      const char f = s.front(), b = s.back();
      if ((f == '`' && b == '`') || (f == '"' && b == '"') || (f == '\'' && b == '\'')) {
        s = s.substr(1, s.size() - 2);
        changed = true;
      }
    }
    auto t = std::string(text::trim(s));
    if (t != s) {
      s = t;
      changed = true;
    }
  }
  if (cat == IocCategory::file && s.find('/') != std::string::npos) {
    std::string collapsed;
    for (char c : s)
      if (!(c == '/' && !collapsed.empty() && collapsed.back() == '/')) collapsed += c;
    if (collapsed.size() > 1 && collapsed.back() == '/') collapsed.pop_back();
    s = collapsed;
  }
  if (s.empty() || is_none_marker(s)) return std::nullopt;
  return s;
}

// Text in the investigation output format; parse_acr_response reads it back.
inline std::string render_report(const InvestigationReport& r) {
  std::string out = "Attack Narrative: " + r.narrative + "\n\nKey Steps:\n";
  if (r.key_steps.empty()) out += "None\n";
  for (std::size_t i = 0; i < r.key_steps.size(); ++i) {
    out += std::to_string(i + 1) + ") " + r.key_steps[i].tactic + ": " +
           r.key_steps[i].description + "\n";
  }
  out += "\nIoCs:\n";
  auto list = [&](const char* header, const std::set<std::string>& items) {
    out += std::string("- ") + header + ":";
    if (items.empty()) {
      out += " None\n";
      return;
    }
    out += "\n";
    for (const auto& i : items) out += "  - `" + i + "`\n";
  };
  list("IPs", r.ioc_ips);
  list("Processes", r.ioc_processes);
  list("Files", r.ioc_files);
  return out;
}

inline json to_json(const InvestigationReport& r) {
  json steps = json::array();
  for (const auto& s : r.key_steps) steps.push_back({{"tactic", s.tactic}, {"description", s.description}});
  return json{{"narrative", r.narrative},
              {"key_steps", steps},
              {"iocs", {{"ips", r.ioc_ips}, {"processes", r.ioc_processes}, {"files", r.ioc_files}}}};
}

inline InvestigationReport report_from_json(const json& j) {
  InvestigationReport r;
  r.narrative = j.value("narrative", "");
  for (const auto& s : j.value("key_steps", json::array()))
    r.key_steps.push_back({s.value("tactic", ""), s.value("description", "")});
  const auto iocs = j.value("iocs", json::object());
  r.ioc_ips = iocs.value("ips", std::set<std::string>{});
  r.ioc_processes = iocs.value("processes", std::set<std::string>{});
  r.ioc_files = iocs.value("files", std::set<std::string>{});
  return r;
}

}  // namespace hidbench::llm
