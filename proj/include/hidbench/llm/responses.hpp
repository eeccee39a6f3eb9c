#pragma once

// Lenient parsers for model output. Real outputs drift from the requested
// format (markdown emphasis, renamed headers, bullets vs numbers), so section
// headers are matched case-insensitively after stripping list and markdown
// decoration. Parsers never throw on arbitrary text except where a result
// would be meaningless (no recognizable investigation sections at all).

#include <map>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "hidbench/error.hpp"
#include "hidbench/llm/report.hpp"
#include "hidbench/text.hpp"

namespace hidbench::llm {

namespace parse_detail {

inline bool is_digit(char c) { return c >= '0' && c <= '9'; }

// Removes leading bullets ("-", "*", "•", "+") and numbering ("1.", "1)",
// "(1)", "[1)]"), repeatedly. Sets `was_list` when anything was removed.
inline std::string strip_list_marker(std::string_view line, bool* was_list = nullptr) {
  std::string_view s = text::trim(line);
  bool any = false;
  for (int round = 0; round < 3; ++round) {
    bool hit = false;
    for (std::string_view bullet : {"- ", "* ", "+ ", "\xE2\x80\xA2 "}) {
      if (s.substr(0, bullet.size()) == bullet) {
        s.remove_prefix(bullet.size());
        hit = true;
        break;
      }
    }
    if (!hit && (s == "-" || s == "*")) {
      s = {};
      hit = true;
    }
    if (!hit) {
      std::size_t i = 0;
      const bool paren = !s.empty() && (s[0] == '(' || s[0] == '[');
      if (paren) ++i;
      const auto digits_begin = i;
      while (i < s.size() && is_digit(s[i])) ++i;
      if (i > digits_begin && i < s.size()) {
        bool ok = false;
        if (paren && s[i] == ')') {
          ++i;
          if (i < s.size() && s[i] == ']') ++i;
          ok = true;
        } else if (!paren && (s[i] == '.' || s[i] == ')')) {
          ++i;
          if (i < s.size() && s[i] == ']') ++i;
          ok = true;
        }
        if (ok && (i == s.size() || text::is_space(s[i]))) {
          s.remove_prefix(i);
          hit = true;
        }
      }
    }
    if (!hit) break;
    any = true;
    s = text::trim(s);
  }
  if (was_list) *was_list = any;
  return std::string(s);
}

inline std::string strip_emphasis(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i + 1 < s.size() && ((s[i] == '*' && s[i + 1] == '*') || (s[i] == '_' && s[i + 1] == '_'))) {
      ++i;
      continue;
    }
    out += s[i];
  }
  return std::string(text::trim(out));
}

enum class Section { none, narrative, steps, iocs, ips, processes, files, other };

struct Header {
  Section section;
  std::string rest;
};

inline std::optional<Header> match_header(std::string_view line) {
  std::string s = strip_list_marker(line);
  std::string_view v = s;
  while (!v.empty() && (v.front() == '#' || v.front() == '*' || v.front() == '_' ||
                        v.front() == '>' || text::is_space(v.front())))
    v.remove_prefix(1);

  struct Phrase {
    std::string_view text;
    Section section;
  };
  static constexpr Phrase phrases[] = {
      {"attack narrative", Section::narrative},
      {"narrative", Section::narrative},
      {"key steps", Section::steps},
      {"indicators of compromise", Section::iocs},
      {"iocs", Section::iocs},
      {"ioc", Section::iocs},
      {"ip addresses", Section::ips},
      {"ip address", Section::ips},
      {"ips", Section::ips},
      {"processes", Section::processes},
      {"files", Section::files},
  };
  for (const auto& p : phrases) {
    if (!text::starts_with_icase(v, p.text)) continue;
    std::string_view r = v.substr(p.text.size());
    if (!r.empty() && (std::isalnum(static_cast<unsigned char>(r.front())) || r.front() == '-'))
      continue;
    r = text::trim(r);
    if (!r.empty() && r.front() == '(') {
      const auto close = r.find(')');
      if (close == std::string_view::npos) continue;
      r = text::trim(r.substr(close + 1));
    }
    while (!r.empty() && (r.front() == '*' || r.front() == '_')) r.remove_prefix(1);
    if (!r.empty() && r.front() != ':') continue;
    if (!r.empty()) r.remove_prefix(1);
    while (!r.empty() && (r.front() == '*' || r.front() == '_')) r.remove_prefix(1);
    return Header{p.section, std::string(text::trim(r))};
  }
  return std::nullopt;
}

// A heading we do not recognise; it ends whatever section is open.
inline bool is_generic_header(std::string_view line) {
  const auto t = text::trim(line);
  if (t.empty()) return false;
  if (t.front() == '#') return true;
  if (t.size() > 4 && t.substr(0, 2) == "**") {
    const auto tail = t.substr(t.size() - 3);
    if (t.substr(t.size() - 2) == "**" || tail == "**:" || tail == ":**") {
      // "**x**: more text" is an emphasised lead-in, not a heading.
      return t.find("**", 2) >= t.size() - 3;
    }
  }
  if (t.find("===") == 0) return true;
  return false;
}

inline std::vector<std::string> backtick_spans(std::string_view s) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    const auto b = s.find('`', pos);
    if (b == std::string_view::npos) break;
    const auto e = s.find('`', b + 1);
    if (e == std::string_view::npos) break;
    out.emplace_back(s.substr(b + 1, e - b - 1));
    pos = e + 1;
  }
  return out;
}

inline std::vector<std::string> ioc_items(std::string_view raw, IocCategory cat, bool inline_list) {
  std::vector<std::string> out;
  std::string s = strip_list_marker(raw);
  if (is_none_marker(strip_emphasis(s))) return out;
  auto add = [&](std::string_view v) {
    if (auto n = normalize_ioc(v, cat)) out.push_back(*n);
  };
  if (auto spans = backtick_spans(s); !spans.empty()) {
    for (const auto& sp : spans) add(sp);
    return out;
  }
  s = strip_emphasis(s);
  auto cut = std::string_view(s);
  for (std::string_view sep : {" (", " - ", " \xE2\x80\x94 ", " \xE2\x80\x93 ", ": "}) {
    const auto p = cut.find(sep);
    if (p != std::string_view::npos && p > 0) cut = cut.substr(0, p);
  }
  if (!inline_list) {
    add(cut);
    return out;
  }
  std::size_t start = 0;
  while (start <= cut.size()) {
    auto comma = cut.find(',', start);
    if (comma == std::string_view::npos) comma = cut.size();
    add(cut.substr(start, comma - start));
    start = comma + 1;
  }
  return out;
}

inline std::optional<KeyStep> key_step(std::string_view raw) {
  std::string s = strip_emphasis(strip_list_marker(raw));
  if (s.empty() || is_none_marker(s)) return std::nullopt;
  const auto colon = s.find(':');
  if (colon == std::string::npos) return KeyStep{"", s};
  std::string tactic(text::trim(std::string_view(s).substr(0, colon)));
  if (tactic.size() >= 2 && tactic.front() == '[' && tactic.back() == ']')
    tactic = tactic.substr(1, tactic.size() - 2);
  return KeyStep{tactic, std::string(text::trim(std::string_view(s).substr(colon + 1)))};
}

inline bool is_placeholder_command(std::string_view s) {
  const auto l = text::lower(text::trim(s));
  return l == "..." || l == "[command line]" || l == "[the command line]" || l == "…";
}

inline std::optional<std::string> clean_command(std::string_view raw) {
  std::string s(text::trim(raw));
  if (auto spans = backtick_spans(s); !spans.empty()) {
    s = spans.front();
  } else {
    s = strip_emphasis(s);
  }
  s = std::string(text::trim(s));
  if (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') || (s.front() == '\'' && s.back() == '\'')))
    s = std::string(text::trim(std::string_view(s).substr(1, s.size() - 2)));
  // Trailing sentence period from "1. [Command line]." but not "cd ." or "..".
  if (s.size() >= 2 && s.back() == '.') {
    const char prev = s[s.size() - 2];
    if (prev != '.' && prev != '/' && !text::is_space(prev)) s.pop_back();
  }
  if (s.empty() || is_placeholder_command(s) || is_none_marker(s)) return std::nullopt;
  return s;
}

inline void push_unique(std::vector<std::string>& v, std::set<std::string>& seen, std::string s) {
  if (seen.insert(s).second) v.push_back(std::move(s));
}

}  // namespace parse_detail

struct MeiResponse {
  std::vector<std::string> commands;
  std::map<std::string, std::string> reasons;
  bool used_fallback = false;
  std::vector<std::string> warnings;
};

// Commands listed under "Summarize All Highly Suspicious Commands", or, when
// that section is missing, the "Command line N:" entries.
inline MeiResponse parse_mei_response(std::string_view response) {
  using namespace parse_detail;
  static const std::regex numbered(R"(^command\s*line\s*\d+\s*[:.)]\s*(.*)$)", std::regex::icase);
  static const std::regex reason(R"(^reason\s*:\s*(.*)$)", std::regex::icase);

  MeiResponse out;
  std::vector<std::string> summary, numbered_cmds;
  std::set<std::string> summary_seen, numbered_seen;
  bool summary_found = false, in_summary = false;
  std::string last_cmd;

  for (const auto& line : text::split_lines(response)) {
    const auto t = std::string(text::trim(line));
    const auto stripped = strip_emphasis(strip_list_marker(t));
    std::smatch m;
    if (std::regex_match(stripped, m, numbered)) {
      in_summary = false;
      if (auto c = clean_command(m[1].str())) {
        push_unique(numbered_cmds, numbered_seen, *c);
        last_cmd = *c;
      }
      continue;
    }
    if (std::regex_match(stripped, m, reason)) {
      if (!last_cmd.empty()) out.reasons.emplace(last_cmd, std::string(text::trim(m[1].str())));
      continue;
    }
    if (text::contains_icase(t, "highly suspicious commands") &&
        (text::contains_icase(t, "summar") || (!stripped.empty() && stripped.back() == ':'))) {
      summary_found = in_summary = true;
      const auto colon = stripped.find(':');
      if (colon != std::string::npos) {
        if (auto c = clean_command(std::string_view(stripped).substr(colon + 1)))
          push_unique(summary, summary_seen, *c);
      }
      continue;
    }
    if (!in_summary || t.empty()) continue;
    if (is_generic_header(t)) {
      in_summary = false;
      continue;
    }
    bool was_list = false;
    const auto item = strip_list_marker(t, &was_list);
    if (!was_list && t.find('`') == std::string::npos) {
      if (!summary.empty() || is_none_marker(t)) in_summary = false;
      continue;
    }
    if (auto c = clean_command(item)) push_unique(summary, summary_seen, *c);
  }

  if (summary_found) {
    out.commands = std::move(summary);
  } else if (!numbered_cmds.empty()) {
    out.commands = std::move(numbered_cmds);
    out.used_fallback = true;
    out.warnings.push_back("summary section missing; using 'Command line N:' entries");
  } else {
    out.warnings.push_back("no suspicious-command section found");
  }
  return out;
}

// Throws ResponseParseError when none of the investigation sections appear.
inline InvestigationReport parse_acr_response(std::string_view response) {
  using namespace parse_detail;
  InvestigationReport r;
  Section sec = Section::none;
  bool recognized = false;
  std::vector<std::string> narrative;
  std::set<std::string>* list = nullptr;
  IocCategory cat = IocCategory::ip;

  auto select = [&](Section s) {
    sec = s;
    list = nullptr;
    if (s == Section::ips) list = &r.ioc_ips, cat = IocCategory::ip;
    if (s == Section::processes) list = &r.ioc_processes, cat = IocCategory::process;
    if (s == Section::files) list = &r.ioc_files, cat = IocCategory::file;
  };

  for (const auto& line : text::split_lines(response)) {
    const auto t = text::trim(line);
    if (auto h = match_header(t)) {
      recognized = true;
      select(h->section);
      if (h->rest.empty()) continue;
      if (sec == Section::narrative) narrative.push_back(h->rest);
      if (list)
        for (auto& i : ioc_items(h->rest, cat, true)) list->insert(std::move(i));
      continue;
    }
    if (is_generic_header(t)) {
      select(Section::other);
      continue;
    }
    if (t.empty()) continue;
    switch (sec) {
      case Section::narrative: narrative.emplace_back(t); break;
      case Section::steps: {
        bool was_list = false;
        strip_list_marker(t, &was_list);
        if (!was_list && !r.key_steps.empty()) {
          r.key_steps.back().description += " " + std::string(t);
        } else if (auto step = key_step(t)) {
          r.key_steps.push_back(std::move(*step));
        }
        break;
      }
      case Section::ips:
      case Section::processes:
      case Section::files:
        for (auto& i : ioc_items(t, cat, false)) list->insert(std::move(i));
        break;
      default: break;
    }
  }
  if (!recognized)
    throw ResponseParseError("no investigation sections (narrative, key steps, IoCs) found",
                             std::string(response));
  for (std::size_t i = 0; i < narrative.size(); ++i) {
    if (i) r.narrative += ' ';
    r.narrative += narrative[i];
  }
  return r;
}

}  // namespace hidbench::llm
