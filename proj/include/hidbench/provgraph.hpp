#pragma once

// Provenance graph over window events: entities are nodes, events with an
// object are directed edges subject -> object.
//
// Text form (the payload handed to the model):
//
//   NODES
//   <id> <kind> [path=<v>] [rip=<v>] [rport=<n>] [lip=<v>] [lport=<n>]
//   EDGES
//   <edge_id> <src> -> <dst> <label> <ts_ns> ["<cmdline>"]
//
// Tokens are bare when they consist only of printable non-space characters
// other than  " \ = #  and are not "->"; otherwise they are double-quoted with
// backslash escapes (\" \\ \n \r \t). A present cmdline is always quoted.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "hidbench/error.hpp"
#include "hidbench/ingest.hpp"
#include "hidbench/rng.hpp"
#include "hidbench/text.hpp"

namespace hidbench::graph {

struct Edge {
  std::string edge_id;
  std::string src;
  std::string dst;
  std::string label;
  std::int64_t timestamp_ns = 0;
  std::optional<std::string> cmdline;

  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

struct ProvenanceGraph {
  EntityMap nodes;
  std::vector<Edge> edges;

  bool empty() const noexcept { return nodes.empty() && edges.empty(); }
};

// Node-set and edge-multiset equality; edge order is irrelevant.
inline bool structurally_equal(const ProvenanceGraph& a, const ProvenanceGraph& b) {
  if (a.nodes != b.nodes || a.edges.size() != b.edges.size()) return false;
  auto ea = a.edges, eb = b.edges;
  std::sort(ea.begin(), ea.end());
  std::sort(eb.begin(), eb.end());
  return ea == eb;
}

inline ProvenanceGraph build_graph(const std::vector<Event>& events, const EntityMap& entities) {
  ingest::check_references(events, entities);
  ProvenanceGraph g;
  for (const auto& ev : events) {
    g.nodes.emplace(ev.subject_id, entities.at(ev.subject_id));
    if (!ev.object_id) continue;
    g.nodes.emplace(*ev.object_id, entities.at(*ev.object_id));
    g.edges.push_back(Edge{ev.event_id, ev.subject_id, *ev.object_id, ev.event_type,
                           ev.timestamp_ns, ev.cmdline});
  }
  return g;
}

// Undirected hop distance: edges are walked in both directions so that a
// seed's ancestry and its effects are both reached.
inline ProvenanceGraph khop_expand(const ProvenanceGraph& g, const std::set<std::string>& seeds,
                                   int k) {
  if (k < 0) throw ConfigError("k-hop depth must be non-negative");
  std::vector<std::string> unknown;
  for (const auto& s : seeds)
    if (!g.nodes.count(s)) unknown.push_back(s);
  if (!unknown.empty()) throw ReferentialError("seed entities", unknown);

  std::map<std::string, std::vector<std::string>> adj;
  for (const auto& e : g.edges) {
    adj[e.src].push_back(e.dst);
    adj[e.dst].push_back(e.src);
  }

  std::map<std::string, int> depth;
  std::deque<std::string> queue;
  for (const auto& s : seeds) {
    depth.emplace(s, 0);
    queue.push_back(s);
  }
  while (!queue.empty()) {
    auto cur = std::move(queue.front());
    queue.pop_front();
    const int d = depth.at(cur);
    if (d == k) continue;
    auto it = adj.find(cur);
    if (it == adj.end()) continue;
    for (const auto& next : it->second) {
      if (depth.emplace(next, d + 1).second) queue.push_back(next);
    }
  }

  ProvenanceGraph sub;
  for (const auto& [id, _] : depth) sub.nodes.emplace(id, g.nodes.at(id));
  for (const auto& e : g.edges)
    if (depth.count(e.src) && depth.count(e.dst)) sub.edges.push_back(e);
  return sub;
}

namespace detail {

inline bool bare_char(char c) {
  const auto u = static_cast<unsigned char>(c);
  return u > 0x20 && u < 0x7f && c != '"' && c != '\\' && c != '=' && c != '#';
}

inline std::string quote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default: out += c;
    }
  }
  return out + "\"";
}

inline std::string token(std::string_view s) {
  if (!s.empty() && s != "->" && std::all_of(s.begin(), s.end(), bare_char))
    return std::string(s);
  return quote(s);
}

struct Token {
  std::string text;
  bool quoted = false;
};

inline std::vector<Token> tokenize(std::string_view line, std::size_t lineno) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && text::is_space(line[i])) ++i;
    if (i >= line.size()) break;
    Token tok;
    while (i < line.size() && !text::is_space(line[i])) {
      if (line[i] != '"') {
        tok.text += line[i++];
        continue;
      }
      tok.quoted = true;
      ++i;
      bool closed = false;
      while (i < line.size()) {
        char c = line[i++];
        if (c == '"') {
          closed = true;
          break;
        }
        if (c != '\\') {
          tok.text += c;
          continue;
        }
        if (i >= line.size()) throw ParseError("graph", lineno, "dangling escape");
        switch (char e = line[i++]) {
          case '"': tok.text += '"'; break;
          case '\\': tok.text += '\\'; break;
          case 'n': tok.text += '\n'; break;
          case 'r': tok.text += '\r'; break;
          case 't': tok.text += '\t'; break;
          default:
            throw ParseError("graph", lineno, std::string("unknown escape \\") + e);
        }
      }
      if (!closed) throw ParseError("graph", lineno, "unterminated quoted token");
    }
    out.push_back(std::move(tok));
  }
  return out;
}

inline std::string node_line(const Entity& e) {
  std::string line = token(e.entity_id) + " " + to_string(e.kind);
  if (e.path) line += " path=" + token(*e.path);
  if (e.remote_ip) line += " rip=" + token(*e.remote_ip);
  if (e.remote_port) line += " rport=" + std::to_string(*e.remote_port);
  if (e.local_ip) line += " lip=" + token(*e.local_ip);
  if (e.local_port) line += " lport=" + std::to_string(*e.local_port);
  return line;
}

inline std::string edge_line(const Edge& e) {
  std::string line = token(e.edge_id) + " " + token(e.src) + " -> " + token(e.dst) + " " +
                     token(e.label) + " " + std::to_string(e.timestamp_ns);
  if (e.cmdline) line += " " + quote(*e.cmdline);
  return line;
}

template <typename Int>
Int parse_int(const std::string& s, std::size_t lineno, const char* what) {
  Int v{};
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size())
    throw ParseError("graph", lineno, std::string("invalid ") + what + " '" + s + "'");
  return v;
}

}  // namespace detail

struct SerializedGraph {
  std::string text;
  std::vector<std::string> node_order;
  std::vector<std::string> edge_order;
  std::uint64_t rng_seed = 0;
};

// Nodes start in id order and edges in (timestamp, edge_id) order; both are
// then permuted by one SplitMix64 stream (nodes first, then edges), so the
// text depends only on the graph's content and the seed.
inline SerializedGraph serialize_shuffled(const ProvenanceGraph& g, std::uint64_t rng_seed) {
  std::vector<const Entity*> nodes;
  nodes.reserve(g.nodes.size());
  for (const auto& [_, e] : g.nodes) nodes.push_back(&e);
  std::vector<const Edge*> edges;
  edges.reserve(g.edges.size());
  for (const auto& e : g.edges) edges.push_back(&e);
  std::sort(edges.begin(), edges.end(), [](const Edge* a, const Edge* b) {
    return std::tie(a->timestamp_ns, a->edge_id, *a) < std::tie(b->timestamp_ns, b->edge_id, *b);
  });

  SplitMix64 rng(rng_seed);
  shuffle_in_place(std::span(nodes), rng);
  shuffle_in_place(std::span(edges), rng);

  SerializedGraph out;
  out.rng_seed = rng_seed;
  out.text = "NODES\n";
  for (const auto* n : nodes) {
    out.text += detail::node_line(*n) + "\n";
    out.node_order.push_back(n->entity_id);
  }
  out.text += "EDGES\n";
  for (const auto* e : edges) {
    out.text += detail::edge_line(*e) + "\n";
    out.edge_order.push_back(e->edge_id);
  }
  return out;
}

inline ProvenanceGraph parse_serialized(std::string_view text) {
  ProvenanceGraph g;
  enum class Section { none, nodes, edges } section = Section::none;
  std::set<std::string> edge_ids;
  const auto lines = text::split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto lineno = i + 1;
    const auto trimmed = text::trim(lines[i]);
    if (trimmed.empty()) continue;
    if (trimmed == "NODES") {
      if (section != Section::none) throw ParseError("graph", lineno, "unexpected NODES header");
      section = Section::nodes;
      continue;
    }
    if (trimmed == "EDGES") {
      if (section != Section::nodes)
        throw ParseError("graph", lineno, "EDGES header before NODES");
      section = Section::edges;
      continue;
    }
    const auto toks = detail::tokenize(trimmed, lineno);
    if (section == Section::none) throw ParseError("graph", lineno, "content before NODES header");

    if (section == Section::nodes) {
      if (toks.size() < 2) throw ParseError("graph", lineno, "node line needs id and kind");
      Entity e;
      e.entity_id = toks[0].text;
      auto kind = entity_kind_from_string(toks[1].text);
      if (!kind || toks[1].quoted)
        throw ParseError("graph", lineno, "unknown entity kind '" + toks[1].text + "'");
      e.kind = *kind;
      for (std::size_t t = 2; t < toks.size(); ++t) {
        const auto& raw = toks[t].text;
        const auto eq = raw.find('=');
        if (eq == std::string::npos)
          throw ParseError("graph", lineno, "attribute without '=': " + raw);
        const auto key = raw.substr(0, eq);
        const auto val = raw.substr(eq + 1);
        if (key == "path") e.path = val;
        else if (key == "rip") e.remote_ip = val;
        else if (key == "lip") e.local_ip = val;
        else if (key == "rport") e.remote_port = detail::parse_int<int>(val, lineno, "port");
        else if (key == "lport") e.local_port = detail::parse_int<int>(val, lineno, "port");
        else throw ParseError("graph", lineno, "unknown attribute '" + key + "'");
      }
      if (!g.nodes.emplace(e.entity_id, e).second)
        throw ParseError("graph", lineno, "duplicate node '" + e.entity_id + "'");
      continue;
    }

    if (toks.size() != 6 && toks.size() != 7)
      throw ParseError("graph", lineno, "edge line needs 6 or 7 fields");
    if (toks[2].text != "->" || toks[2].quoted)
      throw ParseError("graph", lineno, "expected '->' between endpoints");
    Edge e;
    e.edge_id = toks[0].text;
    e.src = toks[1].text;
    e.dst = toks[3].text;
    e.label = toks[4].text;
    e.timestamp_ns = detail::parse_int<std::int64_t>(toks[5].text, lineno, "timestamp");
    if (toks.size() == 7) e.cmdline = toks[6].text;
    for (const auto* end : {&e.src, &e.dst}) {
      if (!g.nodes.count(*end))
        throw ParseError("graph", lineno, "edge '" + e.edge_id + "' references undeclared node '" +
                                              *end + "'");
    }
    if (!edge_ids.insert(e.edge_id).second)
      throw ParseError("graph", lineno, "duplicate edge '" + e.edge_id + "'");
    g.edges.push_back(std::move(e));
  }
  if (section != Section::edges) throw ParseError("graph", 0, "missing NODES/EDGES sections");
  return g;
}

}  // namespace hidbench::graph
