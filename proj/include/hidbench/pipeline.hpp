#pragma once

// Staged runner behind the command-line tool. Each stage reads only the
// files its predecessor wrote under <out>/<dataset>/:
//
//   ingest/   events.jsonl entities.jsonl labels.json ingest_meta.json
//   segment/  window.jsonl window_meta.json entities.jsonl [budget_violation.json]
//   detect/   graph.txt detection.json usage.jsonl
//   eval/     predictions.json confusion.json metrics.csv
//
// plus run-level metrics.csv, report.txt, regimes.csv, costs.csv and
// costs.txt under <out>/. A stage that fails leaves <stage>/.partial.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hidbench/detect.hpp"
#include "hidbench/error.hpp"
#include "hidbench/eval.hpp"
#include "hidbench/ingest.hpp"
#include "hidbench/llm/backend.hpp"
#include "hidbench/llm/client.hpp"
#include "hidbench/provgraph.hpp"
#include "hidbench/report.hpp"
#include "hidbench/rng.hpp"
#include "hidbench/segment.hpp"
#include "hidbench/text.hpp"

namespace hidbench::pipeline {

namespace fs = std::filesystem;

enum class Stage { ingest, segment, detect, eval };

inline const char* to_string(Stage s) {
  switch (s) {
    case Stage::ingest: return "ingest";
    case Stage::segment: return "segment";
    case Stage::detect: return "detect";
    case Stage::eval: return "eval";
  }
  return "?";
}

// `all` expands to every stage in order.
inline std::vector<Stage> stages_from_string(const std::string& s) {
  if (s == "all") return {Stage::ingest, Stage::segment, Stage::detect, Stage::eval};
  if (s == "ingest") return {Stage::ingest};
  if (s == "segment") return {Stage::segment};
  if (s == "detect") return {Stage::detect};
  if (s == "eval") return {Stage::eval};
  throw ConfigError("unknown stage '" + s + "' (expected ingest, segment, detect, eval or all)");
}

class StageError : public Error {
 public:
  StageError(Stage stage, std::string dataset, const std::string& detail)
      : Error(std::string("[") + to_string(stage) + "] dataset '" + dataset + "': " + detail),
        stage_(stage),
        dataset_(std::move(dataset)) {}

  Stage stage() const noexcept { return stage_; }
  const std::string& dataset() const noexcept { return dataset_; }

 private:
  Stage stage_;
  std::string dataset_;
};

struct DatasetConfig {
  std::string name;
  std::string events;
  std::string entities;
  std::string labels;
  std::string environment;
};

struct RunConfig {
  std::vector<DatasetConfig> datasets;
  std::vector<llm::ModelEndpoint> endpoints;
  std::string active_endpoint;
  detect::DetectionConfig detection;
  std::string output_dir = "out";
  std::optional<std::int64_t> token_budget;  // default: active endpoint context
  bool trim_over_budget = false;
  std::vector<std::string> forbidden_tokens;
  std::size_t parallelism = 1;
  std::optional<std::string> mock_fixtures;
  std::uint64_t seed = 0;

  const llm::ModelEndpoint& endpoint() const {
    for (const auto& e : endpoints)
      if (e.name == active_endpoint) return e;
    throw ConfigError("active endpoint '" + active_endpoint + "' not defined");
  }

  std::int64_t budget() const { return token_budget.value_or(endpoint().max_context_tokens); }

  const DatasetConfig& dataset(const std::string& name) const {
    for (const auto& d : datasets)
      if (d.name == name) return d;
    throw ConfigError("unknown dataset '" + name + "'");
  }

  // Dataset names and label paths are always forbidden in prompts.
  std::vector<std::string> guard_tokens() const {
    std::set<std::string> all(forbidden_tokens.begin(), forbidden_tokens.end());
    for (const auto& d : datasets) {
      all.insert(d.name);
      all.insert(d.labels);
      all.insert(fs::path(d.labels).filename().string());
    }
    all.erase("");
    return {all.begin(), all.end()};
  }

  // Seeds differ per dataset but do not depend on dataset order.
  std::uint64_t dataset_seed(const std::string& name) const { return derive_seed(seed, text::fnv1a64(name)); }

  void validate(bool check_files = true) const {
    if (datasets.empty()) throw ConfigError("config lists no datasets");
    std::set<std::string> names;
    for (const auto& d : datasets) {
      if (d.name.empty()) throw ConfigError("dataset entry without a name");
      if (!names.insert(d.name).second) throw ConfigError("duplicate dataset name '" + d.name + "'");
      if (!check_files) continue;
      for (const auto* p : {&d.events, &d.entities, &d.labels})
        if (p->empty() || !fs::is_regular_file(*p))
          throw ConfigError("dataset '" + d.name + "': file not found: " + (p->empty() ? "(unset)" : *p));
    }
    endpoint();
    detection.validate();
    if (parallelism == 0) throw ConfigError("parallelism must be >= 1");
    if (token_budget && *token_budget <= 0) throw ConfigError("token_budget must be > 0");
  }

  // Relative paths resolve against `base_dir` (the config file's directory).
  static RunConfig from_json(const json& j, const fs::path& base_dir = {}) {
    auto resolve = [&](const std::string& p) {
      if (p.empty() || fs::path(p).is_absolute() || base_dir.empty()) return p;
      return (base_dir / p).lexically_normal().string();
    };
    RunConfig c;
    try {
      for (const auto& d : j.at("datasets")) {
        DatasetConfig dc;
        dc.name = d.at("name").get<std::string>();
        dc.events = resolve(d.at("events").get<std::string>());
        dc.entities = resolve(d.at("entities").get<std::string>());
        dc.labels = resolve(d.at("labels").get<std::string>());
        dc.environment = d.value("environment", "");
        c.datasets.push_back(std::move(dc));
      }
      std::vector<std::string> active;
      for (const auto& e : j.at("endpoints")) {
        c.endpoints.push_back(llm::ModelEndpoint::from_json(e));
        auto& url = c.endpoints.back().base_url;
        if (url.rfind("mock://", 0) == 0) url = "mock://" + resolve(url.substr(7));
        if (e.value("active", false)) active.push_back(c.endpoints.back().name);
      }
      if (active.size() != 1)
        throw ConfigError("exactly one endpoint must be marked active, found " + std::to_string(active.size()));
      c.active_endpoint = active.front();
      if (auto d = j.find("detection"); d != j.end()) c.detection = detect::DetectionConfig::from_json(*d);
      c.output_dir = resolve(j.value("output_dir", std::string("out")));
      if (auto b = j.find("token_budget"); b != j.end() && !b->is_null()) c.token_budget = b->get<std::int64_t>();
      c.trim_over_budget = j.value("trim_over_budget", false);
      c.forbidden_tokens = j.value("forbidden_tokens", std::vector<std::string>{});
      c.parallelism = j.value("parallelism", std::size_t{1});
      if (auto m = j.find("mock_fixtures"); m != j.end() && !m->is_null())
        c.mock_fixtures = resolve(m->get<std::string>());
      c.seed = j.value("seed", std::uint64_t{0});
    } catch (const json::exception& e) {
      throw ConfigError(std::string("invalid config: ") + e.what());
    }
    return c;
  }

  static RunConfig load(const std::string& path) {
    json j;
    try {
      j = json::parse(text::read_file(path));
    } catch (const json::parse_error& e) {
      throw ConfigError("config " + path + ": " + e.what());
    }
    return from_json(j, fs::absolute(path).parent_path());
  }
};

namespace detail {

inline void write(const fs::path& p, std::string_view content) {
  fs::create_directories(p.parent_path());
  text::write_file(p.string(), content);
}

inline std::string pretty(const json& j) { return j.dump(2) + "\n"; }

inline json read_json(const fs::path& p) {
  try {
    return json::parse(text::read_file(p.string()));
  } catch (const json::parse_error& e) {
    throw ParseError(p.string(), 0, e.what());
  }
}

inline json ledger_entry_json(const llm::LedgerEntry& e) {
  return json{{"model", e.model},
              {"dataset", e.dataset},
              {"stage", e.stage},
              {"sample_index", e.sample_index},
              {"usage", llm::to_json(e.usage)}};
}

inline llm::LedgerEntry ledger_entry_from_json(const json& j) {
  llm::LedgerEntry e;
  e.model = j.at("model").get<std::string>();
  e.dataset = j.at("dataset").get<std::string>();
  e.stage = j.at("stage").get<std::string>();
  e.sample_index = j.at("sample_index").get<std::size_t>();
  const auto& u = j.at("usage");
  e.usage.prompt_tokens = u.at("prompt_tokens").get<std::int64_t>();
  e.usage.completion_tokens = u.at("completion_tokens").get<std::int64_t>();
  e.usage.total_tokens = u.at("total_tokens").get<std::int64_t>();
  e.usage.wall_time_s = u.at("wall_time_s").get<double>();
  e.usage.cost = llm::Money::from_json(u.at("cost"));
  return e;
}

}  // namespace detail

inline std::vector<llm::LedgerEntry> read_usage_jsonl(const fs::path& p) {
  std::vector<llm::LedgerEntry> out;
  std::istringstream in(text::read_file(p.string()));
  ingest::detail::for_each_json_line(in, p.string(), [&](const json& j, std::size_t line) {
    try {
      out.push_back(detail::ledger_entry_from_json(j));
    } catch (const json::exception& e) {
      throw ParseError(p.string(), line, e.what());
    }
  });
  return out;
}

// Event ids, either a JSON array / {"event_ids": [...]} or one id per line.
// An empty file means no predictions.
inline std::set<std::string> read_predictions(const std::string& path) {
  const auto body = text::read_file(path);
  const auto trimmed = text::trim(body);
  std::set<std::string> ids;
  if (trimmed.empty()) return ids;
  if (trimmed.front() == '[' || trimmed.front() == '{') {
    json j;
    try {
      j = json::parse(trimmed);
    } catch (const json::parse_error& e) {
      throw ParseError(path, 0, e.what());
    }
    const json& arr = j.is_object() ? j.at("event_ids") : j;
    for (const auto& id : arr) ids.insert(id.get<std::string>());
    return ids;
  }
  for (const auto& line : text::split_lines(trimmed))
    if (auto t = text::trim(line); !t.empty()) ids.insert(std::string(t));
  return ids;
}

struct StageOptions {
  std::optional<std::string> predictions;  // eval: score this file instead of the detection report
};

class Runner {
 public:
  // `backend` overrides backend selection (tests); otherwise the mock backend
  // is used when fixtures are configured or the endpoint url is mock://, and
  // `http_factory` builds the real one.
  using BackendFactory = std::function<std::unique_ptr<llm::Backend>()>;

  explicit Runner(RunConfig config, BackendFactory http_factory = {}, llm::Backend* backend = nullptr)
      : config_(std::move(config)), http_factory_(std::move(http_factory)), backend_override_(backend) {}

  const RunConfig& config() const noexcept { return config_; }
  fs::path dataset_dir(const std::string& name) const { return fs::path(config_.output_dir) / name; }

  void run_stage(Stage stage, const DatasetConfig& ds, const StageOptions& opts = {}) {
    const auto dir = dataset_dir(ds.name) / to_string(stage);
    fs::remove_all(dir);
    fs::create_directories(dir);
    try {
      switch (stage) {
        case Stage::ingest: ingest_stage(ds); break;
        case Stage::segment: segment_stage(ds); break;
        case Stage::detect: detect_stage(ds); break;
        case Stage::eval: eval_stage(ds, opts); break;
      }
    } catch (const std::exception& e) {
      const StageError err(stage, ds.name, e.what());
      text::write_file((dir / ".partial").string(), std::string(err.what()) + "\n");
      throw err;
    }
  }

  // Runs the stages for each selected dataset (all when `only` is empty),
  // datasets in parallel up to config.parallelism. Returns the errors; the
  // run-level summary is refreshed whenever eval was among the stages.
  std::vector<std::string> run(const std::vector<Stage>& stages, const std::optional<std::string>& only = {},
                               const StageOptions& opts = {}) {
    std::vector<const DatasetConfig*> selected;
    for (const auto& d : config_.datasets)
      if (!only || d.name == *only) selected.push_back(&d);
    if (selected.empty()) throw ConfigError("unknown dataset '" + only.value_or("") + "'");

    std::vector<std::string> errors(selected.size());
    auto one = [&](std::size_t i) {
      try {
        for (auto s : stages) run_stage(s, *selected[i], opts);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    };
    const auto par = std::max<std::size_t>(1, config_.parallelism);
    for (std::size_t begin = 0; begin < selected.size(); begin += par) {
      const auto end = std::min(selected.size(), begin + par);
      std::vector<std::future<void>> fut;
      for (auto i = begin; i < end; ++i) fut.push_back(std::async(std::launch::async, one, i));
      for (auto& f : fut) f.get();
    }
    if (std::find(stages.begin(), stages.end(), Stage::eval) != stages.end()) write_summary();
    std::vector<std::string> out;
    for (auto& e : errors)
      if (!e.empty()) out.push_back(std::move(e));
    return out;
  }

  // Run-level tables from whatever per-dataset outputs exist.
  void write_summary() const {
    const fs::path out(config_.output_dir);
    std::vector<std::vector<report::MetricsRow>> metric_files;
    std::vector<llm::LedgerEntry> ledger;
    for (const auto& d : config_.datasets) {
      const auto m = dataset_dir(d.name) / "eval" / "metrics.csv";
      if (fs::is_regular_file(m) && !fs::exists(m.parent_path() / ".partial"))
        metric_files.push_back(report::parse_metrics_csv(text::read_file(m.string()), m.string()));
      const auto u = dataset_dir(d.name) / "detect" / "usage.jsonl";
      if (fs::is_regular_file(u)) {
        auto entries = read_usage_jsonl(u);
        ledger.insert(ledger.end(), entries.begin(), entries.end());
      }
    }
    const auto rows = report::merge_metrics(metric_files);
    detail::write(out / "metrics.csv", report::metrics_csv(rows));
    detail::write(out / "report.txt", report::render_table(rows));
    detail::write(out / "regimes.csv", report::regimes_csv(report::regimes(rows)));
    eval::PriceTable prices;
    for (const auto& e : config_.endpoints) prices.add(e);
    const auto costs = eval::account_costs(ledger, prices);
    detail::write(out / "costs.csv", report::costs_csv(costs));
    detail::write(out / "costs.txt", report::render_cost_table(costs));
  }

 private:
  void ingest_stage(const DatasetConfig& ds) {
    const auto dir = dataset_dir(ds.name) / "ingest";
    auto raw = ingest::read_event_log(ds.events, ds.entities, ds.name);
    std::istringstream labels(text::read_file(ds.labels));
    auto truth = ingest::load_ground_truth(labels, raw, "labels");
    auto log = ingest::dedup_events(raw);

    // Labels on events removed as repeats are dropped with the events.
    std::set<std::string> kept;
    for (const auto& ev : log.events) kept.insert(ev.event_id);
    std::vector<std::string> dropped;
    for (auto it = truth.malicious_event_ids.begin(); it != truth.malicious_event_ids.end();) {
      if (kept.count(*it)) {
        ++it;
      } else {
        dropped.push_back(*it);
        it = truth.malicious_event_ids.erase(it);
      }
    }

    detail::write(dir / "events.jsonl", ingest::events_to_jsonl(log.events));
    detail::write(dir / "entities.jsonl", ingest::entities_to_jsonl(log.entities));
    detail::write(dir / "labels.json", detail::pretty(ingest::to_json(truth)));
    detail::write(dir / "ingest_meta.json",
                  detail::pretty(json{{"events_parsed", raw.events.size()},
                                      {"events_after_dedup", log.events.size()},
                                      {"entities", log.entities.size()},
                                      {"malicious_events", truth.malicious_event_ids.size()},
                                      {"labels_dropped_by_dedup", dropped},
                                      {"imbalance_ratio", ingest::imbalance_ratio(truth, log)}}));
  }

  void segment_stage(const DatasetConfig& ds) {
    const auto in = dataset_dir(ds.name) / "ingest";
    const auto dir = dataset_dir(ds.name) / "segment";
    auto log = ingest::read_event_log((in / "events.jsonl").string(), (in / "entities.jsonl").string(), ds.name);
    std::istringstream labels(text::read_file((in / "labels.json").string()));
    const auto truth = ingest::load_ground_truth(labels, log, (in / "labels.json").string());
    const auto interval = segment::AttackInterval::from(truth);
    auto window = segment::build_attack_window(log, interval);

    json meta_extra = json::object();
    if (auto v = segment::check_budget(window, config_.budget())) {
      detail::write(dir / "budget_violation.json", detail::pretty(v->to_json()));
      if (!config_.trim_over_budget)
        throw BudgetError("window exceeds the token budget (set trim_over_budget to trim context)", v->estimate,
                          v->limit);
      const auto before = window.size();
      window = segment::trim_to_budget(window, config_.budget());
      meta_extra["trimmed_events"] = before - window.size();
    }

    std::set<std::string> used;
    for (const auto& ev : window.events()) {
      used.insert(ev.subject_id);
      if (ev.object_id) used.insert(*ev.object_id);
    }
    EntityMap ents;
    for (const auto& id : used) ents.emplace(id, log.entities.at(id));

    auto meta = segment::window_meta(window);
    meta["token_budget"] = config_.budget();
    meta.update(meta_extra);
    detail::write(dir / "window.jsonl", segment::window_to_jsonl(window));
    detail::write(dir / "window_meta.json", detail::pretty(meta));
    detail::write(dir / "entities.jsonl", ingest::entities_to_jsonl(ents));
  }

  struct LoadedWindow {
    segment::AttackWindow window;
    EntityMap entities;
  };

  LoadedWindow load_window(const DatasetConfig& ds) const {
    const auto in = dataset_dir(ds.name) / "segment";
    const auto meta = detail::read_json(in / "window_meta.json");
    const auto iv = segment::AttackInterval::make(meta.at("t_s").get<std::int64_t>(),
                                                  meta.at("t_e").get<std::int64_t>());
    std::istringstream ents(text::read_file((in / "entities.jsonl").string()));
    LoadedWindow out;
    out.entities = ingest::parse_entities(ents, (in / "entities.jsonl").string());
    std::istringstream win(text::read_file((in / "window.jsonl").string()));
    out.window = segment::read_window_jsonl(win, iv, (in / "window.jsonl").string());
    ingest::check_references(out.window.events(), out.entities);
    return out;
  }

  llm::Backend& backend() {
    if (backend_override_) return *backend_override_;
    std::lock_guard lock(backend_mu_);
    if (!backend_) {
      const auto& ep = config_.endpoint();
      if (config_.mock_fixtures)
        backend_ = std::make_unique<llm::MockBackend>(*config_.mock_fixtures);
      else if (ep.base_url.rfind("mock://", 0) == 0)
        backend_ = std::make_unique<llm::MockBackend>(ep.base_url.substr(7));
      else if (http_factory_)
        backend_ = http_factory_();
      else
        throw ConfigError("no backend available for endpoint '" + ep.name + "'");
    }
    return *backend_;
  }

  void detect_stage(const DatasetConfig& ds) {
    const auto dir = dataset_dir(ds.name) / "detect";
    auto [window, entities] = load_window(ds);

    std::optional<std::vector<Event>> full_log;
    if (config_.detection.graph_scope == detect::GraphScope::full_log) {
      const auto in = dataset_dir(ds.name) / "ingest";
      auto log = ingest::read_event_log((in / "events.jsonl").string(), (in / "entities.jsonl").string());
      full_log = std::move(log.events);
      entities = std::move(log.entities);
    }

    auto cfg = config_.detection;
    cfg.rng_seed = config_.dataset_seed(ds.name);
    llm::UsageLedger ledger;
    llm::Client client(config_.endpoint(), backend(), &ledger, {}, config_.parallelism);
    const detect::InvestigationContext ctx{ds.environment, ds.name, config_.guard_tokens()};

    const auto g = graph::build_graph(full_log ? *full_log : window.events(), entities);
    detail::write(dir / "graph.txt", graph::serialize_shuffled(g, cfg.rng_seed).text);

    auto result = detect::run_detection(window, entities, cfg, client, ctx, full_log ? &*full_log : nullptr);
    detail::write(dir / "detection.json", detail::pretty(result.to_json()));
    std::string usage;
    for (const auto& e : ledger.snapshot()) usage += detail::ledger_entry_json(e).dump() + "\n";
    detail::write(dir / "usage.jsonl", usage);
  }

  void eval_stage(const DatasetConfig& ds, const StageOptions& opts) {
    const auto dir = dataset_dir(ds.name) / "eval";
    const auto [window, entities] = load_window(ds);
    const auto events = window.events();

    std::string model = config_.endpoint().name;
    std::set<std::string> predicted;
    if (opts.predictions) {
      predicted = read_predictions(*opts.predictions);
    } else {
      const auto det = detail::read_json(dataset_dir(ds.name) / "detect" / "detection.json");
      model = det.at("model").get<std::string>();
      predicted = eval::match_iocs(llm::report_from_json(det.at("report")), events, entities);
    }

    // Labels come from ingest; they are never visible to earlier stages'
    // prompts. Only ids inside the window are scored.
    const auto labels_path = dataset_dir(ds.name) / "ingest" / "labels.json";
    const auto lj = detail::read_json(labels_path);
    GroundTruth truth;
    for (const auto& id : lj.at("malicious_event_ids")) truth.malicious_event_ids.insert(id.get<std::string>());
    truth.t_s = lj.at("t_s").get<std::int64_t>();
    truth.t_e = lj.at("t_e").get<std::int64_t>();

    const auto counts = eval::compute_confusion(predicted, truth, events);
    const auto metrics = eval::compute_metrics(counts);
    auto cj = eval::to_json(counts);
    cj["no_alerts"] = metrics.no_alerts;
    detail::write(dir / "predictions.json", detail::pretty(json{{"event_ids", predicted}}));
    detail::write(dir / "confusion.json", detail::pretty(cj));
    detail::write(dir / "metrics.csv", report::metrics_csv({report::make_row(model, ds.name, metrics)}));
  }

  RunConfig config_;
  BackendFactory http_factory_;
  llm::Backend* backend_override_;
  std::mutex backend_mu_;
  std::unique_ptr<llm::Backend> backend_;
};

}  // namespace hidbench::pipeline
