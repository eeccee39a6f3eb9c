#pragma once

// Shared fixtures and random generators for the test suites.

#include <cstdint>
#include <filesystem>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "hidbench/ingest.hpp"
#include "hidbench/provgraph.hpp"

namespace testsupport {

using namespace hidbench;

inline std::string source_path(const std::string& rel) { return std::string(HIDBENCH_SOURCE_DIR) + "/" + rel; }

inline EventLog parse_log(const std::string& events, const std::string& entities) {
  std::istringstream ev(events), en(entities);
  return ingest::parse_events(ev, en, "t");
}

inline EventLog sample_log() {
  return ingest::read_event_log(source_path("data/sample/events.jsonl"), source_path("data/sample/entities.jsonl"),
                                "sample");
}

inline EntityMap random_entities(std::mt19937_64& rng, int n) {
  EntityMap out;
  for (int i = 0; i < n; ++i) {
    Entity e;
    e.entity_id = "n" + std::to_string(i);
    switch (rng() % 3) {
      case 0:
        e.kind = EntityKind::process;
        e.path = "/bin/p" + std::to_string(rng() % 7);
        break;
      case 1:
        e.kind = EntityKind::file;
        e.path = "/tmp/dir" + std::to_string(rng() % 3) + "/f" + std::to_string(rng() % 9);
        break;
      default:
        e.kind = EntityKind::netflow;
        e.remote_ip = "10.0.0." + std::to_string(rng() % 5);
        e.remote_port = static_cast<int>(rng() % 65536);
        break;
    }
    out.emplace(e.entity_id, e);
  }
  return out;
}

// Events over a small vocabulary so that repeated keys are common.
inline std::vector<Event> random_events(std::mt19937_64& rng, const EntityMap& ents, int n,
                                        std::int64_t max_ts) {
  std::vector<std::string> ids;
  for (const auto& [id, _] : ents) ids.push_back(id);
  static const char* types[] = {"EVENT_READ", "EVENT_WRITE", "EVENT_EXECUTE", "EVENT_CONNECT"};
  static const char* cmds[] = {"ls", "ls -a", "./run", "sh -c x"};
  std::vector<Event> out;
  for (int i = 0; i < n; ++i) {
    Event ev;
    ev.event_id = "ev" + std::to_string(i);
    ev.timestamp_ns = static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(max_ts + 1));
    ev.event_type = types[rng() % 4];
    ev.subject_id = ids[rng() % ids.size()];
    if (rng() % 5 != 0) ev.object_id = ids[rng() % ids.size()];
    if (rng() % 3 == 0) ev.cmdline = cmds[rng() % 4];
    out.push_back(std::move(ev));
  }
  return out;
}

inline EventLog random_log(std::mt19937_64& rng, int n_entities, int n_events, std::int64_t max_ts) {
  EventLog log;
  log.entities = random_entities(rng, n_entities);
  log.events = random_events(rng, log.entities, n_events, max_ts);
  std::sort(log.events.begin(), log.events.end(), event_order);
  return log;
}

// Awkward strings for the serializer: spaces, quotes, escapes, '=', '->'.
inline std::string odd_string(std::mt19937_64& rng) {
  static const char* pool[] = {"plain", "with space", "q\"uote", "back\\slash", "a=b", "->", "tab\there",
                               "new\nline", "#hash", "", "/usr/bin/x", "C:\\Windows\\cmd.exe"};
  return pool[rng() % (sizeof pool / sizeof *pool)];
}

// Random graph with up to `max_nodes` nodes and `max_edges` edges;
// multi-edges and self-loops occur.
inline graph::ProvenanceGraph random_graph(std::mt19937_64& rng, int max_nodes, int max_edges) {
  graph::ProvenanceGraph g;
  const int n = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(max_nodes));
  std::vector<std::string> ids;
  for (int i = 0; i < n; ++i) {
    Entity e;
    e.entity_id = (rng() % 10 == 0 ? "odd id " : "v") + std::to_string(i);
    switch (rng() % 3) {
      case 0:
        e.kind = EntityKind::process;
        if (rng() % 4) e.path = odd_string(rng);
        break;
      case 1:
        e.kind = EntityKind::file;
        if (rng() % 4) e.path = odd_string(rng) + std::to_string(i);
        break;
      default:
        e.kind = EntityKind::netflow;
        e.remote_ip = "192.168.1." + std::to_string(rng() % 256);
        if (rng() % 2) e.remote_port = static_cast<int>(rng() % 65536);
        if (rng() % 3 == 0) e.local_ip = "10.0.0.1";
        if (rng() % 3 == 0) e.local_port = static_cast<int>(rng() % 65536);
        break;
    }
    ids.push_back(e.entity_id);
    g.nodes.emplace(e.entity_id, e);
  }
  const int m = static_cast<int>(rng() % static_cast<std::uint64_t>(max_edges + 1));
  for (int i = 0; i < m; ++i) {
    graph::Edge e;
    e.edge_id = "x" + std::to_string(i);
    e.src = ids[rng() % ids.size()];
    e.dst = ids[rng() % ids.size()];
    e.label = rng() % 2 ? "EVENT_READ" : "EVENT_EXECUTE";
    e.timestamp_ns = static_cast<std::int64_t>(rng() % 1000);
    if (rng() % 3 == 0) e.cmdline = odd_string(rng);
    g.edges.push_back(std::move(e));
  }
  return g;
}

}  // namespace testsupport
