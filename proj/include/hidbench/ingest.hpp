#pragma once

// Canonical telemetry ingestion: line-delimited JSON events plus an entity
// sidecar, event deduplication, and ground-truth labels.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "hidbench/error.hpp"
#include "hidbench/text.hpp"

namespace hidbench {

using json = nlohmann::json;

enum class EntityKind { process, file, netflow };

inline std::string to_string(EntityKind k) {
  switch (k) {
    case EntityKind::process: return "process";
    case EntityKind::file: return "file";
    case EntityKind::netflow: return "netflow";
  }
  return "?";
}

inline std::optional<EntityKind> entity_kind_from_string(std::string_view s) {
  if (s == "process") return EntityKind::process;
  if (s == "file") return EntityKind::file;
  if (s == "netflow") return EntityKind::netflow;
  return std::nullopt;
}

struct Entity {
  std::string entity_id;
  EntityKind kind = EntityKind::process;
  std::optional<std::string> path;
  std::optional<std::string> remote_ip;
  std::optional<int> remote_port;
  std::optional<std::string> local_ip;
  std::optional<int> local_port;

  friend bool operator==(const Entity&, const Entity&) = default;
  friend auto operator<=>(const Entity&, const Entity&) = default;
};

struct Event {
  std::string event_id;
  std::int64_t timestamp_ns = 0;
  std::string event_type;
  std::string subject_id;
  std::optional<std::string> object_id;
  std::optional<std::string> cmdline;
  json extra = json::object();

  friend bool operator==(const Event&, const Event&) = default;
};

// Sort order of an EventLog: ascending timestamp, ties by event_id.
inline bool event_order(const Event& a, const Event& b) {
  return std::tie(a.timestamp_ns, a.event_id) <
         std::tie(b.timestamp_ns, b.event_id);
}

using EntityMap = std::map<std::string, Entity>;

struct EventLog {
  std::vector<Event> events;
  EntityMap entities;
  std::string dataset_name;

  friend bool operator==(const EventLog&, const EventLog&) = default;
};

struct GroundTruth {
  std::set<std::string> malicious_event_ids;
  std::int64_t t_s = 0;
  std::int64_t t_e = 0;
  std::string source_note;

  friend bool operator==(const GroundTruth&, const GroundTruth&) = default;
};

namespace ingest {

namespace detail {

inline std::optional<std::string> opt_string(const json& j, const char* key,
                                             const std::string& src,
                                             std::size_t line) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_string())
    throw ParseError(src, line, std::string("field '") + key +
                                    "' must be a string");
  return it->get<std::string>();
}

inline std::string req_string(const json& j, const char* key,
                              const std::string& src, std::size_t line) {
  auto v = opt_string(j, key, src, line);
  if (!v) throw ParseError(src, line, std::string("missing field '") + key + "'");
  if (v->empty())
    throw ParseError(src, line, std::string("field '") + key + "' is empty");
  return *v;
}

inline std::optional<int> opt_port(const json& j, const char* key,
                                   const std::string& src, std::size_t line) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_number_integer())
    throw ParseError(src, line, std::string("field '") + key +
                                    "' must be an integer");
  const auto v = it->get<long long>();
  if (v < 0 || v > 65535)
    throw ParseError(src, line, std::string("field '") + key +
                                    "' out of port range: " + std::to_string(v));
  return static_cast<int>(v);
}

template <typename Fn>
void for_each_json_line(std::istream& in, const std::string& src, Fn&& fn) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(src, lineno, std::string("malformed JSON: ") + e.what());
    }
    if (!j.is_object()) throw ParseError(src, lineno, "record is not an object");
    fn(j, lineno);
  }
}

}  // namespace detail

inline Entity entity_from_json(const json& j, const std::string& src = "entities",
                               std::size_t line = 0) {
  Entity e;
  e.entity_id = detail::req_string(j, "entity_id", src, line);
  const auto kind = detail::req_string(j, "kind", src, line);
  auto k = entity_kind_from_string(kind);
  if (!k) throw ParseError(src, line, "unknown entity kind '" + kind + "'");
  e.kind = *k;
  e.path = detail::opt_string(j, "path", src, line);
  e.remote_ip = detail::opt_string(j, "rip", src, line);
  e.remote_port = detail::opt_port(j, "rport", src, line);
  e.local_ip = detail::opt_string(j, "lip", src, line);
  e.local_port = detail::opt_port(j, "lport", src, line);

  const bool has_net = e.remote_ip || e.remote_port || e.local_ip || e.local_port;
  if (e.kind == EntityKind::netflow && !has_net)
    throw ParseError(src, line,
                     "netflow entity '" + e.entity_id + "' has no ip or port");
  if (e.kind != EntityKind::netflow && has_net)
    throw ParseError(src, line, to_string(e.kind) + " entity '" + e.entity_id +
                                    "' carries network attributes");
  return e;
}

inline json to_json(const Entity& e) {
  json j;
  j["entity_id"] = e.entity_id;
  j["kind"] = to_string(e.kind);
  if (e.path) j["path"] = *e.path;
  if (e.remote_ip) j["rip"] = *e.remote_ip;
  if (e.remote_port) j["rport"] = *e.remote_port;
  if (e.local_ip) j["lip"] = *e.local_ip;
  if (e.local_port) j["lport"] = *e.local_port;
  return j;
}

inline Event event_from_json(const json& j, const std::string& src = "events",
                             std::size_t line = 0) {
  static const std::set<std::string> known = {"event_id", "ts_ns", "type",
                                              "subject", "object", "cmdline",
                                              "extra", "segment"};
  Event ev;
  ev.event_id = detail::req_string(j, "event_id", src, line);
  auto ts = j.find("ts_ns");
  if (ts == j.end()) throw ParseError(src, line, "missing field 'ts_ns'");
  if (!ts->is_number_integer())
    throw ParseError(src, line, "field 'ts_ns' must be an integer");
  ev.timestamp_ns = ts->get<std::int64_t>();
  if (ev.timestamp_ns < 0)
    throw ParseError(src, line, "negative timestamp for '" + ev.event_id + "'");
  ev.event_type = detail::req_string(j, "type", src, line);
  ev.subject_id = detail::req_string(j, "subject", src, line);
  ev.object_id = detail::opt_string(j, "object", src, line);
  if (ev.object_id && ev.object_id->empty()) ev.object_id.reset();
  ev.cmdline = detail::opt_string(j, "cmdline", src, line);

  if (auto it = j.find("extra"); it != j.end() && !it->is_null()) {
    if (!it->is_object()) throw ParseError(src, line, "field 'extra' must be an object");
    ev.extra = *it;
  }
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key) && !ev.extra.contains(key)) ev.extra[key] = value;
  }
  return ev;
}

inline json to_json(const Event& ev) {
  json j;
  j["event_id"] = ev.event_id;
  j["ts_ns"] = ev.timestamp_ns;
  j["type"] = ev.event_type;
  j["subject"] = ev.subject_id;
  if (ev.object_id) j["object"] = *ev.object_id;
  if (ev.cmdline) j["cmdline"] = *ev.cmdline;
  if (!ev.extra.empty()) j["extra"] = ev.extra;
  return j;
}

inline EntityMap parse_entities(std::istream& in,
                                const std::string& src = "entities") {
  EntityMap out;
  detail::for_each_json_line(in, src, [&](const json& j, std::size_t line) {
    auto e = entity_from_json(j, src, line);
    auto id = e.entity_id;
    if (!out.emplace(id, std::move(e)).second)
      throw ParseError(src, line, "duplicate entity_id '" + id + "'");
  });
  return out;
}

// Checks that every subject/object id resolves; throws ReferentialError
// listing the missing ids in sorted order.
inline void check_references(const std::vector<Event>& events,
                             const EntityMap& entities) {
  std::set<std::string> missing;
  for (const auto& ev : events) {
    if (!entities.count(ev.subject_id)) missing.insert(ev.subject_id);
    if (ev.object_id && !entities.count(*ev.object_id))
      missing.insert(*ev.object_id);
  }
  if (!missing.empty())
    throw ReferentialError("entity references",
                           {missing.begin(), missing.end()});
}

inline EventLog parse_events(std::istream& events, EntityMap entities,
                             std::string dataset_name = {},
                             const std::string& src = "events") {
  EventLog log;
  log.dataset_name = std::move(dataset_name);
  std::set<std::string> seen;
  detail::for_each_json_line(events, src, [&](const json& j, std::size_t line) {
    auto ev = event_from_json(j, src, line);
    if (!seen.insert(ev.event_id).second)
      throw ParseError(src, line, "duplicate event_id '" + ev.event_id + "'");
    log.events.push_back(std::move(ev));
  });
  check_references(log.events, entities);
  std::sort(log.events.begin(), log.events.end(), event_order);
  log.entities = std::move(entities);
  return log;
}

inline EventLog parse_events(std::istream& events, std::istream& entities,
                             std::string dataset_name = {}) {
  return parse_events(events, parse_entities(entities), std::move(dataset_name));
}

inline EventLog read_event_log(const std::string& events_path,
                               const std::string& entities_path,
                               std::string dataset_name = {}) {
  std::istringstream ents(text::read_file(entities_path));
  auto entity_map = parse_entities(ents, entities_path);
  std::istringstream evs(text::read_file(events_path));
  return parse_events(evs, std::move(entity_map), std::move(dataset_name),
                      events_path);
}

inline std::string events_to_jsonl(const std::vector<Event>& events) {
  std::string out;
  for (const auto& ev : events) out += to_json(ev).dump() + "\n";
  return out;
}

inline std::string entities_to_jsonl(const EntityMap& entities) {
  std::string out;
  for (const auto& [id, e] : entities) out += to_json(e).dump() + "\n";
  return out;
}

// Key under which repeated events collapse.
struct DedupKey {
  std::string subject_id;
  std::optional<std::string> object_id;
  std::string event_type;
  std::optional<std::string> cmdline;
  std::optional<std::string> object_path;

  friend auto operator<=>(const DedupKey&, const DedupKey&) = default;
};

inline DedupKey dedup_key(const Event& ev, const EntityMap& entities) {
  DedupKey k{ev.subject_id, ev.object_id, ev.event_type, ev.cmdline, std::nullopt};
  if (ev.object_id) {
    if (auto it = entities.find(*ev.object_id); it != entities.end())
      k.object_path = it->second.path;
  }
  return k;
}

// Keeps the earliest event of each dedup key. Input order is the sorted log
// order, so "first seen" is "earliest".
inline EventLog dedup_events(const EventLog& log) {
  EventLog out;
  out.entities = log.entities;
  out.dataset_name = log.dataset_name;
  std::set<DedupKey> seen;
  for (const auto& ev : log.events) {
    if (seen.insert(dedup_key(ev, log.entities)).second) out.events.push_back(ev);
  }
  return out;
}

inline GroundTruth ground_truth_from_json(const json& j, const EventLog& log,
                                          const std::string& src = "labels") {
  if (!j.is_object()) throw ParseError(src, 0, "label file is not an object");
  GroundTruth gt;
  auto ids = j.find("malicious_event_ids");
  if (ids == j.end() || !ids->is_array())
    throw ParseError(src, 0, "missing array 'malicious_event_ids'");
  for (const auto& id : *ids) {
    if (!id.is_string()) throw ParseError(src, 0, "malicious id must be a string");
    gt.malicious_event_ids.insert(id.get<std::string>());
  }
  for (const char* key : {"t_s", "t_e"}) {
    if (!j.contains(key) || !j[key].is_number_integer())
      throw ParseError(src, 0, std::string("missing integer '") + key + "'");
  }
  gt.t_s = j["t_s"].get<std::int64_t>();
  gt.t_e = j["t_e"].get<std::int64_t>();
  if (auto n = j.find("note"); n != j.end() && n->is_string())
    gt.source_note = n->get<std::string>();

  if (gt.t_s >= gt.t_e)
    throw IntervalError("attack interval requires t_s < t_e, got [" +
                        std::to_string(gt.t_s) + ", " + std::to_string(gt.t_e) + "]");

  std::map<std::string, std::int64_t> ts_by_id;
  for (const auto& ev : log.events) ts_by_id.emplace(ev.event_id, ev.timestamp_ns);
  std::vector<std::string> missing;
  for (const auto& id : gt.malicious_event_ids)
    if (!ts_by_id.count(id)) missing.push_back(id);
  if (!missing.empty()) throw ReferentialError("malicious event ids", missing);

  for (const auto& id : gt.malicious_event_ids) {
    const auto ts = ts_by_id.at(id);
    if (ts < gt.t_s || ts > gt.t_e)
      throw IntervalError("malicious event '" + id + "' at " + std::to_string(ts) +
                          " lies outside [" + std::to_string(gt.t_s) + ", " +
                          std::to_string(gt.t_e) + "]");
  }
  return gt;
}

inline GroundTruth load_ground_truth(std::istream& in, const EventLog& log,
                                     const std::string& src = "labels") {
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(src, 0, std::string("malformed JSON: ") + e.what());
  }
  return ground_truth_from_json(j, log, src);
}

inline json to_json(const GroundTruth& gt) {
  return json{{"malicious_event_ids", gt.malicious_event_ids},
              {"t_s", gt.t_s},
              {"t_e", gt.t_e},
              {"note", gt.source_note}};
}

// Benign events per malicious event, rounded to nearest ("1:N" in summaries).
inline long long imbalance_ratio(const GroundTruth& gt, const EventLog& log) {
  const auto mal = static_cast<long long>(gt.malicious_event_ids.size());
  if (mal == 0) return 0;
  const auto benign = static_cast<long long>(log.events.size()) - mal;
  return std::llround(static_cast<double>(benign) / static_cast<double>(mal));
}

}  // namespace ingest
}  // namespace hidbench
