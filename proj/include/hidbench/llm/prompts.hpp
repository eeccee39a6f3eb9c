#pragma once

// The two investigation prompts plus the refinement prompt used by
// self-reflection. Templates are fixed text; only the command list, the
// environment string and the serialized graph are substituted.

#include <string>
#include <string_view>
#include <vector>

#include "hidbench/error.hpp"
#include "hidbench/llm/report.hpp"
#include "hidbench/segment.hpp"
#include "hidbench/text.hpp"

namespace hidbench::llm {

enum class PromptKind { mei, acr, refine };

inline const char* to_string(PromptKind k) {
  switch (k) {
    case PromptKind::mei: return "mei";
    case PromptKind::acr: return "acr";
    case PromptKind::refine: return "refine";
  }
  return "?";
}

inline constexpr std::string_view kMeiHead =
    "Required: Command lines [CMDs] in truncated events.\n"
    "\n"
    "Analyze the command lines and identify all commands related to attacks or highly "
    "suspicious malware activity without internet search.\n"
    "\n"
    "- Command Lines:\n";

inline constexpr std::string_view kMeiTail =
    "- Output Format:\n"
    "  - Command line 1: [The command line]\n"
    "    Reason: [Brief description]\n"
    "  - Command line 2: [The command line]\n"
    "    Reason: [Brief description]\n"
    "  - ...\n"
    "- Summarize All Highly Suspicious Commands:\n"
    "  - 1. [Command line].\n"
    "  - 2. [Command line].\n"
    "  - ...\n";

inline constexpr std::string_view kAcrHead =
    "Required: Provenance graph G.\n"
    "\n"
    "Inspect the provided provenance graph. Analyze the graph to determine whether it "
    "indicates malicious activity. Use only the given information (no external lookup).\n"
    "\n"
    "- Logs (Graph):\n";

inline constexpr std::string_view kAcrTail =
    "- Guidelines:\n"
    "  - Provenance: Use knowledge of attack patterns, tools, and techniques to identify IoCs "
    "from graph interactions.\n"
    "  - Attack Narrative: Summarize the attack flow using a kill chain perspective.\n"
    "  - Tools: Pay attention to specific tools (e.g., Metasploit, Meterpreter, PowerShell).\n"
    "  - Timeline: Construct a chronological step-by-step description based on graph "
    "structure and temporal signals (if available).\n"
    "  - IoCs: Identify suspicious IPs, domains, processes, and files.\n"
    "- Output Format:\n"
    "  - Attack Narrative: A concise paragraph summarizing the attack flow.\n"
    "  - Key Steps:\n"
    "    - 1) [Tactic name]: description of the attack step\n"
    "    - 2) [Tactic name]: description of the attack step\n"
    "    - ...\n"
    "  - IoCs:\n"
    "    - IPs: [Suspicious IPs]\n"
    "    - Processes: [Suspicious process names]\n"
    "    - Files: [Suspicious file modifications or deletions]\n";

inline constexpr std::string_view kRefineHead =
    "Review the previous findings against the provided provenance graph. Verify every IoC "
    "against the graph and remove each entry that the graph does not support. Keep supported "
    "entries unchanged and do not add new ones. Use only the given information (no external "
    "lookup).\n"
    "\n"
    "- Logs (Graph):\n";

inline constexpr std::string_view kFindingsBegin = "--- BEGIN FINDINGS ---";
inline constexpr std::string_view kFindingsEnd = "--- END FINDINGS ---";

// Case-insensitive substring scan; returns the configured tokens that occur.
inline std::vector<std::string> find_forbidden_tokens(std::string_view text,
                                                      const std::vector<std::string>& forbidden) {
  std::vector<std::string> hits;
  const auto haystack = text::lower(text);
  for (const auto& tok : forbidden) {
    if (tok.empty()) continue;
    if (haystack.find(text::lower(tok)) != std::string::npos) hits.push_back(tok);
  }
  return hits;
}

// Checks applied to every rendered prompt before it leaves the process.
struct PromptGuard {
  std::vector<std::string> forbidden_tokens;
  std::int64_t max_context_tokens = 0;  // 0 = unchecked
  segment::TokenEstimator estimator = segment::default_estimator();

  void check(std::string_view prompt) const {
    if (auto hits = find_forbidden_tokens(prompt, forbidden_tokens); !hits.empty())
      throw ContaminationError(std::move(hits));
    if (max_context_tokens > 0) {
      const auto est = estimator(prompt);
      if (est > max_context_tokens)
        throw BudgetError("prompt exceeds the model context", est, max_context_tokens);
    }
  }
};

namespace detail {

inline std::string one_line(std::string_view s) {
  std::string out(s);
  for (auto& c : out)
    if (c == '\n' || c == '\r') c = ' ';
  return out;
}

inline std::string graph_block(std::string_view graph_text) {
  std::string out(graph_text);
  if (!out.empty() && out.back() != '\n') out += '\n';
  return out;
}

}  // namespace detail

inline std::string render_mei_prompt(const std::vector<std::string>& commands,
                                     std::string_view environment,
                                     const PromptGuard& guard = {}) {
  std::string p(kMeiHead);
  if (commands.empty()) p += "  - (none)\n";
  for (const auto& c : commands) p += "  - " + detail::one_line(c) + "\n";
  p += "- Environment: The command lines are collected on " + std::string(environment) + ".\n";
  p += kMeiTail;
  guard.check(p);
  return p;
}

inline std::string render_acr_prompt(std::string_view serialized_graph,
                                     std::string_view environment,
                                     const PromptGuard& guard = {}) {
  std::string p(kAcrHead);
  p += detail::graph_block(serialized_graph);
  p += "- Environment: The logs are collected on " + std::string(environment) + "\n";
  p += kAcrTail;
  guard.check(p);
  return p;
}

inline std::string render_refine_prompt(const InvestigationReport& findings,
                                        std::string_view serialized_graph,
                                        std::string_view environment,
                                        const PromptGuard& guard = {}) {
  std::string p(kRefineHead);
  p += detail::graph_block(serialized_graph);
  p += "- Environment: The logs are collected on " + std::string(environment) + "\n";
  p += "- Previous Findings:\n";
  p += std::string(kFindingsBegin) + "\n" + render_report(findings) + std::string(kFindingsEnd) + "\n";
  p += "- Output Format: the same format as the previous findings (Attack Narrative, Key "
       "Steps, IoCs with IPs, Processes, Files).\n";
  guard.check(p);
  return p;
}

// The findings block embedded by render_refine_prompt, or empty.
inline std::string extract_findings(std::string_view refine_prompt) {
  const auto b = refine_prompt.find(kFindingsBegin);
  const auto e = refine_prompt.find(kFindingsEnd);
  if (b == std::string_view::npos || e == std::string_view::npos || e < b) return {};
  const auto start = b + kFindingsBegin.size() + 1;
  return std::string(refine_prompt.substr(start, e - start));
}

}  // namespace hidbench::llm
