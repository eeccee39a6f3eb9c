#pragma once

// Detection flow over one attack window:
//   evidence identification -> k-hop context expansion -> attack-chain
//   reconstruction sampled vote_k times -> strict-majority vote on IoCs,
//   with optional self-reflection before or after the vote.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "hidbench/error.hpp"
#include "hidbench/ingest.hpp"
#include "hidbench/llm/client.hpp"
#include "hidbench/llm/prompts.hpp"
#include "hidbench/llm/report.hpp"
#include "hidbench/llm/responses.hpp"
#include "hidbench/provgraph.hpp"
#include "hidbench/rng.hpp"
#include "hidbench/segment.hpp"
#include "hidbench/text.hpp"

namespace hidbench::detect {

using llm::InvestigationReport;

enum class Reflection { none, ref_then_agg, agg_then_ref };
enum class GraphScope { window, full_log };

inline const char* to_string(Reflection r) {
  switch (r) {
    case Reflection::none: return "none";
    case Reflection::ref_then_agg: return "ref_then_agg";
    case Reflection::agg_then_ref: return "agg_then_ref";
  }
  return "?";
}

inline Reflection reflection_from_string(const std::string& s) {
  if (s == "none") return Reflection::none;
  if (s == "ref_then_agg") return Reflection::ref_then_agg;
  if (s == "agg_then_ref") return Reflection::agg_then_ref;
  throw ConfigError("unknown reflection strategy '" + s + "'");
}

struct DetectionConfig {
  int k_hop = 2;
  int vote_k = 3;
  bool majority_voting = true;  // false: single-shot, one sample regardless of vote_k
  Reflection reflection = Reflection::none;
  std::uint64_t rng_seed = 0;
  GraphScope graph_scope = GraphScope::window;

  void validate() const {
    if (k_hop < 0) throw ConfigError("k_hop must be >= 0");
    if (vote_k != 1 && vote_k != 3 && vote_k != 5 && vote_k != 7)
      throw ConfigError("vote_k must be one of 1, 3, 5, 7; got " + std::to_string(vote_k));
  }

  int samples() const { return majority_voting ? vote_k : 1; }

  // Effective settings only, so equivalent configurations (vote_k=1 and
  // single-shot) produce the same snapshot.
  json snapshot() const {
    return json{{"k_hop", k_hop},
                {"samples", samples()},
                {"aggregation", samples() > 1 ? "majority" : "single"},
                {"reflection", to_string(reflection)},
                {"rng_seed", rng_seed},
                {"graph_scope", graph_scope == GraphScope::window ? "window" : "full_log"}};
  }

  static DetectionConfig from_json(const json& j) {
    DetectionConfig c;
    c.k_hop = j.value("k_hop", c.k_hop);
    c.vote_k = j.value("vote_k", c.vote_k);
    c.majority_voting = j.value("majority_voting", c.majority_voting);
    c.reflection = reflection_from_string(j.value("reflection", std::string("none")));
    c.rng_seed = j.value("rng_seed", c.rng_seed);
    const auto scope = j.value("graph_scope", std::string("window"));
    if (scope == "window") c.graph_scope = GraphScope::window;
    else if (scope == "full_log") c.graph_scope = GraphScope::full_log;
    else throw ConfigError("unknown graph_scope '" + scope + "'");
    c.validate();
    return c;
  }
};

// Per-call context shared by all prompts of one detection run.
struct InvestigationContext {
  std::string environment;
  std::string dataset;
  std::vector<std::string> forbidden_tokens;
};

struct EvidenceCommand {
  std::string command;
  std::string rationale;
};

enum class EvidenceStatus { ok, no_cmdline_events, nothing_flagged, unresolved };

inline const char* to_string(EvidenceStatus s) {
  switch (s) {
    case EvidenceStatus::ok: return "ok";
    case EvidenceStatus::no_cmdline_events: return "no_cmdline_events";
    case EvidenceStatus::nothing_flagged: return "nothing_flagged";
    case EvidenceStatus::unresolved: return "unresolved";
  }
  return "?";
}

struct EvidenceSet {
  std::vector<EvidenceCommand> commands;
  std::set<std::string> seed_entities;
  EvidenceStatus status = EvidenceStatus::ok;
  std::vector<std::string> warnings;
  std::vector<std::string> raw_texts;
  std::vector<std::string> prompt_hashes;

  bool fallback() const noexcept { return seed_entities.empty(); }
};

// Distinct non-empty command lines in window order.
inline std::vector<std::string> distinct_cmdlines(const std::vector<Event>& events) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& ev : events) {
    if (!ev.cmdline || text::trim(*ev.cmdline).empty()) continue;
    if (seen.insert(*ev.cmdline).second) out.push_back(*ev.cmdline);
  }
  return out;
}

// Subject entities of the events each command refers to: exact cmdline match
// first; otherwise events whose cmdline tokens include all of the command's.
inline std::set<std::string> resolve_seeds(const std::vector<std::string>& commands,
                                           const std::vector<Event>& events) {
  std::set<std::string> seeds;
  for (const auto& cmd : commands) {
    bool exact = false;
    for (const auto& ev : events) {
      if (ev.cmdline && *ev.cmdline == cmd) {
        seeds.insert(ev.subject_id);
        exact = true;
      }
    }
    if (exact) continue;
    const auto want = text::split_ws(cmd);
    if (want.empty()) continue;
    const std::set<std::string> want_set(want.begin(), want.end());
    for (const auto& ev : events) {
      if (!ev.cmdline) continue;
      const auto have = text::split_ws(*ev.cmdline);
      const std::set<std::string> have_set(have.begin(), have.end());
      if (std::includes(have_set.begin(), have_set.end(), want_set.begin(), want_set.end()))
        seeds.insert(ev.subject_id);
    }
  }
  return seeds;
}

namespace detail {

// Splits the command list until every batch renders within the context.
inline std::vector<std::vector<std::string>> mei_batches(const std::vector<std::string>& cmds,
                                                         const InvestigationContext& ctx,
                                                         const llm::PromptGuard& guard) {
  try {
    llm::render_mei_prompt(cmds, ctx.environment, guard);
    return {cmds};
  } catch (const BudgetError&) {
    if (cmds.size() <= 1) throw;
  }
  const auto mid = cmds.begin() + static_cast<std::ptrdiff_t>(cmds.size() / 2);
  auto left = mei_batches({cmds.begin(), mid}, ctx, guard);
  auto right = mei_batches({mid, cmds.end()}, ctx, guard);
  left.insert(left.end(), right.begin(), right.end());
  return left;
}

}  // namespace detail

inline EvidenceSet identify_evidence(const segment::AttackWindow& window, llm::Client& client,
                                     const InvestigationContext& ctx) {
  EvidenceSet ev;
  const auto events = window.events();
  const auto cmds = distinct_cmdlines(events);
  if (cmds.empty()) {
    ev.status = EvidenceStatus::no_cmdline_events;
    ev.warnings.push_back("window has no command-line events");
    return ev;
  }
  const auto guard = client.guard(ctx.forbidden_tokens);
  std::set<std::string> seen;
  std::vector<std::string> flagged;
  for (const auto& batch : detail::mei_batches(cmds, ctx, guard)) {
    const auto prompt = llm::render_mei_prompt(batch, ctx.environment, guard);
    auto done = client.complete(prompt, llm::PromptKind::mei, 1, {ctx.dataset, "mei"});
    const auto parsed = llm::parse_mei_response(done.front().text);
    ev.raw_texts.push_back(done.front().text);
    ev.prompt_hashes.push_back(done.front().prompt_hash);
    ev.warnings.insert(ev.warnings.end(), parsed.warnings.begin(), parsed.warnings.end());
    for (const auto& c : parsed.commands) {
      if (!seen.insert(c).second) continue;
      flagged.push_back(c);
      auto r = parsed.reasons.find(c);
      ev.commands.push_back({c, r == parsed.reasons.end() ? std::string{} : r->second});
    }
  }
  ev.seed_entities = resolve_seeds(flagged, events);
  if (flagged.empty()) ev.status = EvidenceStatus::nothing_flagged;
  else if (ev.seed_entities.empty()) ev.status = EvidenceStatus::unresolved;
  return ev;
}

struct SampleRecord {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  std::string prompt_hash;
  std::string payload;
  std::string raw_text;
  std::optional<InvestigationReport> report;
  std::string parse_error;
  llm::UsageRecord usage;
};

struct ChainRun {
  graph::ProvenanceGraph subgraph;
  bool full_graph_fallback = false;
  std::vector<SampleRecord> samples;

  std::vector<InvestigationReport> reports() const {
    std::vector<InvestigationReport> out;
    for (const auto& s : samples)
      if (s.report) out.push_back(*s.report);
    return out;
  }
};

// Sample i serializes the expanded subgraph with derive_seed(rng_seed, i).
inline ChainRun reconstruct_chain(const graph::ProvenanceGraph& g, const EvidenceSet& evidence,
                                  const DetectionConfig& config, llm::Client& client,
                                  const InvestigationContext& ctx) {
  config.validate();
  ChainRun run;
  run.full_graph_fallback = evidence.seed_entities.empty();
  run.subgraph = run.full_graph_fallback ? g : graph::khop_expand(g, evidence.seed_entities, config.k_hop);

  const auto n = static_cast<std::size_t>(config.samples());
  const auto guard = client.guard(ctx.forbidden_tokens);
  std::vector<llm::CompletionRequest> reqs;
  for (std::size_t i = 0; i < n; ++i) {
    SampleRecord rec;
    rec.index = i;
    rec.seed = derive_seed(config.rng_seed, i);
    rec.payload = graph::serialize_shuffled(run.subgraph, rec.seed).text;
    auto req = client.request(llm::render_acr_prompt(rec.payload, ctx.environment, guard),
                              llm::PromptKind::acr, i, n > 1);
    req.seed = rec.seed;
    reqs.push_back(std::move(req));
    run.samples.push_back(std::move(rec));
  }
  auto done = client.complete_batch(reqs, {ctx.dataset, "acr"});
  std::vector<std::string> raws;
  for (std::size_t i = 0; i < n; ++i) {
    auto& rec = run.samples[i];
    rec.prompt_hash = done[i].prompt_hash;
    rec.raw_text = done[i].text;
    rec.usage = done[i].usage;
    raws.push_back(rec.raw_text);
    try {
      rec.report = llm::parse_acr_response(rec.raw_text);
    } catch (const ResponseParseError& e) {
      rec.parse_error = e.what();
    }
  }
  if (run.reports().empty()) throw DetectionError("no investigation sample could be parsed", raws);
  return run;
}

// Keeps an IoC iff it occurs in strictly more than half of the reports
// (per category, after normalization). Narrative and key steps come from the
// report sharing the most IoCs with the voted sets; ties go to the earliest.
inline InvestigationReport majority_vote(const std::vector<InvestigationReport>& reports) {
  if (reports.empty()) throw Error("majority_vote needs at least one report");
  InvestigationReport voted;
  for (auto cat : llm::kIocCategories) {
    std::map<std::string, std::size_t> counts;
    for (const auto& r : reports) {
      std::set<std::string> normalized;
      for (const auto& ioc : r.iocs(cat))
        if (auto n = llm::normalize_ioc(ioc, cat)) normalized.insert(*n);
      for (const auto& ioc : normalized) ++counts[ioc];
    }
    for (const auto& [ioc, c] : counts)
      if (2 * c > reports.size()) voted.iocs(cat).insert(ioc);
  }
  std::size_t best = 0, best_overlap = 0;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    std::size_t overlap = 0;
    for (auto cat : llm::kIocCategories)
      for (const auto& ioc : reports[i].iocs(cat)) {
        auto n = llm::normalize_ioc(ioc, cat);
        if (n && voted.iocs(cat).count(*n)) ++overlap;
      }
    if (overlap > best_overlap) {
      best = i;
      best_overlap = overlap;
    }
  }
  voted.narrative = reports[best].narrative;
  voted.key_steps = reports[best].key_steps;
  return voted;
}

struct ReflectionRecord {
  std::size_t index = 0;
  std::string prompt_hash;
  std::string raw_text;
  bool kept_original = false;
  llm::UsageRecord usage;
};

// Applies the reflection strategy and the vote. `payloads[i]` is the graph
// text sample i was shown; reports and payloads are index-aligned.
inline InvestigationReport self_reflect(const std::vector<InvestigationReport>& reports,
                                        const std::vector<std::string>& payloads, Reflection strategy,
                                        llm::Client& client, const InvestigationContext& ctx,
                                        std::vector<ReflectionRecord>* log = nullptr) {
  if (reports.empty() || reports.size() != payloads.size())
    throw Error("self_reflect needs index-aligned, non-empty reports and payloads");
  if (strategy == Reflection::none) return majority_vote(reports);

  const auto guard = client.guard(ctx.forbidden_tokens);
  auto refine = [&](const std::vector<InvestigationReport>& in,
                    const std::vector<std::string>& graphs) {
    std::vector<llm::CompletionRequest> reqs;
    for (std::size_t i = 0; i < in.size(); ++i)
      reqs.push_back(client.request(llm::render_refine_prompt(in[i], graphs[i], ctx.environment, guard),
                                    llm::PromptKind::refine, i, in.size() > 1));
    auto done = client.complete_batch(reqs, {ctx.dataset, "refine"});
    std::vector<InvestigationReport> out;
    for (std::size_t i = 0; i < in.size(); ++i) {
      ReflectionRecord rec{i, done[i].prompt_hash, done[i].text, false, done[i].usage};
      try {
        out.push_back(llm::parse_acr_response(done[i].text));
      } catch (const ResponseParseError&) {
        out.push_back(in[i]);
        rec.kept_original = true;
      }
      if (log) log->push_back(std::move(rec));
    }
    return out;
  };

  if (strategy == Reflection::ref_then_agg) return majority_vote(refine(reports, payloads));
  return refine({majority_vote(reports)}, {payloads.front()}).front();
}

struct DetectionResult {
  json config;
  std::string model;
  EvidenceSet evidence;
  ChainRun chain;
  std::vector<ReflectionRecord> reflections;
  InvestigationReport report;
  std::vector<std::string> warnings;

  json to_json() const {
    json ev_cmds = json::array();
    for (const auto& c : evidence.commands) ev_cmds.push_back({{"command", c.command}, {"rationale", c.rationale}});
    json samples = json::array();
    for (const auto& s : chain.samples) {
      json j{{"index", s.index},
             {"seed", s.seed},
             {"prompt_hash", s.prompt_hash},
             {"raw_text", s.raw_text},
             {"usage", llm::to_json(s.usage)}};
      if (s.report) j["report"] = llm::to_json(*s.report);
      else j["parse_error"] = s.parse_error;
      samples.push_back(std::move(j));
    }
    json refl = json::array();
    for (const auto& r : reflections)
      refl.push_back({{"index", r.index},
                      {"prompt_hash", r.prompt_hash},
                      {"raw_text", r.raw_text},
                      {"kept_original", r.kept_original},
                      {"usage", llm::to_json(r.usage)}});
    return json{{"config", config},
                {"model", model},
                {"evidence",
                 {{"status", to_string(evidence.status)},
                  {"commands", ev_cmds},
                  {"seed_entities", evidence.seed_entities},
                  {"prompt_hashes", evidence.prompt_hashes},
                  {"raw_texts", evidence.raw_texts},
                  {"warnings", evidence.warnings}}},
                {"subgraph",
                 {{"nodes", chain.subgraph.nodes.size()},
                  {"edges", chain.subgraph.edges.size()},
                  {"full_graph_fallback", chain.full_graph_fallback}}},
                {"samples", samples},
                {"reflections", refl},
                {"report", llm::to_json(report)},
                {"warnings", warnings}};
  }
};

// Full detection over one window. When the evidence step yields no seeds the
// whole window graph is investigated; if that does not fit the model context
// the window's outer context is trimmed until it does.
inline DetectionResult run_detection(const segment::AttackWindow& window, const EntityMap& entities,
                                     const DetectionConfig& config, llm::Client& client,
                                     const InvestigationContext& ctx,
                                     const std::vector<Event>* full_log = nullptr) {
  config.validate();
  DetectionResult res;
  res.config = config.snapshot();
  res.model = client.endpoint().name;
  res.evidence = identify_evidence(window, client, ctx);

  auto events_of = [&](const segment::AttackWindow& w) {
    return config.graph_scope == GraphScope::full_log && full_log ? *full_log : w.events();
  };
  auto g = graph::build_graph(events_of(window), entities);

  if (res.evidence.fallback()) {
    res.warnings.push_back("no evidence seeds; investigating the full window graph");
    const auto guard = client.guard();
    segment::AttackWindow w = window;
    for (int attempt = 0;; ++attempt) {
      const auto payload = graph::serialize_shuffled(g, derive_seed(config.rng_seed, 0)).text;
      const auto est = client.estimator()(llm::render_acr_prompt(payload, ctx.environment));
      const auto limit = client.endpoint().max_context_tokens;
      if (est <= limit) break;
      if (attempt >= 16 || (w.pre.empty() && w.post.empty()))
        throw BudgetError("window graph does not fit the model context", est, limit);
      const auto target = std::max<std::int64_t>(
          0, static_cast<std::int64_t>(static_cast<double>(w.token_estimate) * limit / est) - 1);
      w = segment::trim_to_budget(w, target, client.estimator());
      g = graph::build_graph(w.events(), entities);
      res.warnings.push_back("trimmed window context to " + std::to_string(w.size()) + " events");
    }
  }

  res.chain = reconstruct_chain(g, res.evidence, config, client, ctx);
  std::vector<InvestigationReport> reports;
  std::vector<std::string> payloads;
  for (const auto& s : res.chain.samples) {
    if (!s.report) {
      res.warnings.push_back("sample " + std::to_string(s.index) + " unparseable: " + s.parse_error);
      continue;
    }
    reports.push_back(*s.report);
    payloads.push_back(s.payload);
  }
  res.report = self_reflect(reports, payloads, config.reflection, client, ctx, &res.reflections);
  return res;
}

}  // namespace hidbench::detect
