#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <map>
#include <random>

#include "hidbench/eval.hpp"
#include "support.hpp"

using namespace hidbench;
using namespace hidbench::eval;

namespace {

InvestigationReport report(std::set<std::string> ips, std::set<std::string> procs, std::set<std::string> files) {
  InvestigationReport r;
  r.ioc_ips = std::move(ips);
  r.ioc_processes = std::move(procs);
  r.ioc_files = std::move(files);
  return r;
}

GroundTruth truth(std::set<std::string> ids) {
  GroundTruth g;
  g.malicious_event_ids = std::move(ids);
  g.t_s = 0;
  g.t_e = 1;
  return g;
}

std::vector<Event> events_named(std::initializer_list<const char*> ids) {
  std::vector<Event> out;
  for (auto* id : ids) {
    Event e;
    e.event_id = id;
    e.event_type = "EVENT_READ";
    e.subject_id = "p";
    out.push_back(e);
  }
  return out;
}

struct Row {
  std::string model, dataset;
  double pre, mcc, fpr;
};

// Plain reader for the published table; independent of the report module.
std::vector<Row> published() {
  std::ifstream in(testsupport::source_path("tests/data/main_results.csv"));
  std::vector<Row> rows;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    Row r;
    std::string f;
    std::getline(ss, r.model, ',');
    std::getline(ss, r.dataset, ',');
    std::getline(ss, f, ',');
    r.pre = std::stod(f);
    std::getline(ss, f, ',');
    r.mcc = std::stod(f);
    std::getline(ss, f, ',');
    r.fpr = std::stod(f);
    rows.push_back(r);
  }
  return rows;
}

double mcc_formula(double tp, double fp, double fn, double tn) {
  const double d = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
  return d == 0 ? 0 : (tp * tn - fp * fn) / std::sqrt(d);
}

}  // namespace

TEST(MatchIocs, EntityKinds) {
  auto log = testsupport::sample_log();
  auto hits = [&](const InvestigationReport& r) { return match_iocs(r, log.events, log.entities); };

  // IP: every event touching n_c2.
  std::set<std::string> c2;
  for (const auto& e : log.events)
    if (e.subject_id == "n_c2" || e.object_id == "n_c2") c2.insert(e.event_id);
  EXPECT_EQ(hits(report({"81.49.200.166"}, {}, {})), c2);
  EXPECT_FALSE(c2.empty());

  EXPECT_TRUE(hits(report({}, {}, {})).empty());
  EXPECT_TRUE(hits(report({"9.9.9.9"}, {"nonexistent"}, {"/nope"})).empty());
}

TEST(MatchIocs, PathSuffixAtComponentBoundary) {
  using detail::path_matches;
  EXPECT_TRUE(path_matches("/var/log/devc", "/var/log/devc"));
  EXPECT_TRUE(path_matches("/var/log/devc", "devc"));
  EXPECT_TRUE(path_matches("/var/log/devc", "log/devc"));
  EXPECT_TRUE(path_matches("/var/log/devc", "/log/devc"));
  EXPECT_FALSE(path_matches("/var/log/xdevc", "devc"));
  EXPECT_FALSE(path_matches("/var/log/devc", "/var/log"));
  EXPECT_FALSE(path_matches("/a", ""));
  EXPECT_FALSE(path_matches("c", "abc"));
}

TEST(MatchIocs, ProcessByBasenameOrPathAndCmdlineToken) {
  EntityMap ents;
  Entity p;
  p.entity_id = "p";
  p.kind = EntityKind::process;
  p.path = "/tmp/gtcache";
  ents.emplace("p", p);
  Entity q = p;
  q.entity_id = "q";
  q.path = "/bin/sh";
  ents.emplace("q", q);
  Event a;
  a.event_id = "a";
  a.event_type = "EVENT_READ";
  a.subject_id = "p";
  Event b = a;
  b.event_id = "b";
  b.subject_id = "q";
  b.cmdline = "sh -c ./gtcache gtcache";
  Event c = b;
  c.event_id = "c";
  c.cmdline = "sh -c xgtcache";
  std::vector<Event> evs{a, b, c};
  EXPECT_EQ(match_iocs(report({}, {"gtcache"}, {}), evs, ents), (std::set<std::string>{"a", "b"}));
  EXPECT_EQ(match_iocs(report({}, {"/tmp/gtcache"}, {}), evs, ents), std::set<std::string>{"a"});
}

TEST(MatchIocs, OracleAndMonotonicity) {
  std::mt19937_64 rng(31);
  const std::vector<std::string> procs{"p0", "p3", "p6", "ls", "./run"};
  const std::vector<std::string> files{"f1", "/tmp/dir1/f2", "dir0/f8", "/tmp"};
  const std::vector<std::string> ips{"10.0.0.1", "10.0.0.4"};
  for (int round = 0; round < 200; ++round) {
    auto log = testsupport::random_log(rng, 12, 60, 1000);
    InvestigationReport r;
    for (auto& s : procs)
      if (rng() % 3 == 0) r.ioc_processes.insert(s);
    for (auto& s : files)
      if (rng() % 3 == 0) r.ioc_files.insert(s);
    for (auto& s : ips)
      if (rng() % 3 == 0) r.ioc_ips.insert(s);

    auto ent_hit = [&](const std::string& id) {
      const auto& e = log.entities.at(id);
      if (e.kind == EntityKind::netflow) return r.ioc_ips.count(*e.remote_ip) > 0;
      const auto& path = *e.path;
      if (e.kind == EntityKind::process) {
        const auto base = path.substr(path.rfind('/') + 1);
        return r.ioc_processes.count(base) + r.ioc_processes.count(path) > 0;
      }
      for (const auto& f : r.ioc_files) {
        if (path == f) return true;
        const auto suffix = f.front() == '/' ? f : "/" + f;
        if (path.size() > suffix.size() && path.compare(path.size() - suffix.size(), suffix.size(), suffix) == 0)
          return true;
      }
      return false;
    };
    std::set<std::string> want;
    for (const auto& e : log.events) {
      bool hit = ent_hit(e.subject_id) || (e.object_id && ent_hit(*e.object_id));
      if (e.cmdline) {
        std::istringstream ss(*e.cmdline);
        std::string tok;
        while (ss >> tok) hit = hit || r.ioc_processes.count(tok) > 0;
      }
      if (hit) want.insert(e.event_id);
    }
    auto got = match_iocs(r, log.events, log.entities);
    ASSERT_EQ(got, want);

    // Adding an IoC never removes a positive.
    auto bigger = r;
    bigger.ioc_processes.insert(procs[rng() % procs.size()]);
    bigger.ioc_files.insert(files[rng() % files.size()]);
    auto more = match_iocs(bigger, log.events, log.entities);
    for (const auto& id : got) ASSERT_TRUE(more.count(id));
  }
}

TEST(Confusion, HandWorked) {
  auto w = events_named({"e1", "e2", "e3", "e4", "e5"});
  auto c = compute_confusion({"e1", "e2"}, truth({"e1", "e3", "outside"}), w);
  EXPECT_EQ(c, (ConfusionCounts{1, 1, 1, 2}));
  EXPECT_EQ(c.total(), 5);
  EXPECT_EQ(to_json(c), (json{{"tp", 1}, {"fp", 1}, {"fn", 1}, {"tn", 2}}));
  EXPECT_EQ(compute_confusion({}, truth({}), w), (ConfusionCounts{0, 0, 0, 5}));
  EXPECT_EQ(compute_confusion({}, truth({}), {}), ConfusionCounts{});
  EXPECT_THROW(compute_confusion({"zz"}, truth({}), w), ReferentialError);
}

TEST(Confusion, SetAlgebraOracle) {
  std::mt19937_64 rng(2);
  for (int round = 0; round < 50; ++round) {
    std::vector<Event> w;
    std::set<std::string> pred, mal, ids;
    for (int i = 0; i < 200; ++i) {
      Event e;
      e.event_id = "e" + std::to_string(i);
      e.event_type = "T";
      e.subject_id = "p";
      w.push_back(e);
      ids.insert(e.event_id);
      if (rng() % 4 == 0) pred.insert(e.event_id);
      if (rng() % 5 == 0) mal.insert(e.event_id);
    }
    auto c = compute_confusion(pred, truth(mal), w);
    std::set<std::string> inter;
    std::set_intersection(pred.begin(), pred.end(), mal.begin(), mal.end(), std::inserter(inter, inter.end()));
    const auto tp = static_cast<std::int64_t>(inter.size());
    EXPECT_EQ(c.tp, tp);
    EXPECT_EQ(c.fp, static_cast<std::int64_t>(pred.size()) - tp);
    EXPECT_EQ(c.fn, static_cast<std::int64_t>(mal.size()) - tp);
    EXPECT_EQ(c.total(), 200);
  }
}

TEST(Metrics, HandWorked) {
  auto m = compute_metrics({9, 3, 2, 28});
  EXPECT_NEAR(m.precision, 0.75, 1e-12);
  EXPECT_NEAR(m.fpr, 3.0 / 31, 1e-12);
  EXPECT_NEAR(m.fpr_percent(), 9.677, 1e-3);
  EXPECT_NEAR(m.mcc, 0.702, 1e-3);
  EXPECT_FALSE(m.no_alerts);

  auto perfect = compute_metrics({5, 0, 0, 95});
  EXPECT_EQ(perfect.precision, 1.0);
  EXPECT_EQ(perfect.fpr, 0.0);
  EXPECT_NEAR(perfect.mcc, 1.0, 1e-12);

  auto inverted = compute_metrics({0, 5, 5, 0});
  EXPECT_NEAR(inverted.mcc, -1.0, 1e-12);
}

TEST(Metrics, DegenerateDenominators) {
  auto none = compute_metrics({0, 0, 4, 96});
  EXPECT_TRUE(none.no_alerts);
  EXPECT_EQ(none.precision, 0.0);
  EXPECT_EQ(none.mcc, 0.0);
  EXPECT_EQ(none.fpr, 0.0);
  auto all_benign_flagged = compute_metrics({0, 10, 0, 0});
  EXPECT_EQ(all_benign_flagged.fpr, 1.0);
  EXPECT_EQ(all_benign_flagged.mcc, 0.0);
  EXPECT_EQ(compute_metrics({}).mcc, 0.0);
  EXPECT_THROW(compute_metrics({-1, 0, 0, 0}), Error);
}

TEST(Metrics, ImbalancedLargeCounts) {
  // 1:753 imbalance at scale; long double keeps the product exact enough.
  auto m = compute_metrics({40, 12, 12, 39'146});
  EXPECT_NEAR(m.mcc, mcc_formula(40, 12, 12, 39'146), 1e-12);
  auto huge = compute_metrics({3'000'000, 10, 20, 4'000'000'000});
  EXPECT_GT(huge.mcc, 0.99);
  EXPECT_LE(huge.mcc, 1.0);
}

TEST(Metrics, RandomAgainstFormula) {
  std::mt19937_64 rng(1000);
  for (int i = 0; i < 1000; ++i) {
    const auto tp = static_cast<std::int64_t>(rng() % 50), fp = static_cast<std::int64_t>(rng() % 50),
               fn = static_cast<std::int64_t>(rng() % 50), tn = static_cast<std::int64_t>(rng() % 5000);
    auto m = compute_metrics({tp, fp, fn, tn});
    const double d_tp = static_cast<double>(tp), d_fp = static_cast<double>(fp), d_fn = static_cast<double>(fn),
                 d_tn = static_cast<double>(tn);
    ASSERT_NEAR(m.precision, tp + fp ? d_tp / (d_tp + d_fp) : 0.0, 1e-12);
    ASSERT_NEAR(m.fpr, fp + tn ? d_fp / (d_fp + d_tn) : 0.0, 1e-12);
    ASSERT_NEAR(m.mcc, mcc_formula(d_tp, d_fp, d_fn, d_tn), 1e-9);
    ASSERT_GE(m.mcc, -1.0);
    ASSERT_LE(m.mcc, 1.0);
  }
}

TEST(Aggregate, MeansPerMetric) {
  std::vector<MetricSet> g{{1.0, 0.0, 0.5, false}, {0.5, 0.02, 0.1, false}};
  auto a = aggregate_metrics(g);
  EXPECT_DOUBLE_EQ(a.precision, 0.75);
  EXPECT_DOUBLE_EQ(a.fpr, 0.01);
  EXPECT_DOUBLE_EQ(a.mcc, 0.3);
  EXPECT_THROW(aggregate_metrics({}), Error);
}

TEST(Aggregate, PublishedPerDatasetMeans) {
  std::map<std::string, std::vector<MetricSet>> by_ds;
  for (const auto& r : published()) by_ds[r.dataset].push_back({r.pre, r.fpr / 100, r.mcc, false});
  ASSERT_EQ(by_ds.size(), 9u);
  const std::map<std::string, double> mcc{{"e3-cadets", 0.4748}, {"e3-theia", 0.2292}, {"e3-trace", 0.8788},
                                          {"nl-hw17", 0.4583},   {"nl-hw20", 0.5698},  {"nl-win10", 0.2682}};
  for (const auto& [ds, want] : mcc) {
    ASSERT_EQ(by_ds.at(ds).size(), 9u);
    EXPECT_NEAR(aggregate_metrics(by_ds.at(ds)).mcc, want, 5e-5) << ds;
  }
  EXPECT_NEAR(aggregate_metrics(by_ds.at("e3-trace")).precision, 1.0, 1e-12);
  // Precision means that agree with the prose; the CADETS ones do not.
  EXPECT_NEAR(aggregate_metrics(by_ds.at("e3-theia")).precision, 0.781, 5e-4);
  EXPECT_NEAR(aggregate_metrics(by_ds.at("e5-theia")).precision, 0.071, 5e-4);
  EXPECT_NEAR(aggregate_metrics(by_ds.at("e5-cadets")).mcc, 0.179, 5e-4);
  EXPECT_GT(std::fabs(aggregate_metrics(by_ds.at("e3-cadets")).precision - 0.839), 0.1);
}

TEST(Regime, Boundaries) {
  auto cls = [](std::vector<double> v) { return classify_regime(v).regime; };
  EXPECT_EQ(cls({0.0}), Regime::conservative);
  EXPECT_EQ(cls({0.249}), Regime::conservative);
  EXPECT_EQ(cls({0.25}), Regime::balanced);
  EXPECT_EQ(cls({0, 0, 0, 0, 0.999}), Regime::conservative);
  EXPECT_EQ(cls({0, 0, 0, 0, 1.0}), Regime::balanced);
  EXPECT_EQ(cls({0.5}), Regime::over_sensitive);
  EXPECT_EQ(cls({0, 0, 0, 0, 2.0}), Regime::over_sensitive);
  EXPECT_EQ(cls({0, 0, 0, 0, 1.99}), Regime::balanced);
  EXPECT_THROW(classify_regime(std::vector<double>{}), Error);
  EXPECT_THROW(classify_regime(std::vector<double>{0.1, -0.1}), Error);
  EXPECT_THROW(classify_regime(std::vector<double>{NAN}), Error);
  RegimeThresholds loose{1, 5, 10, 20};
  EXPECT_EQ(classify_regime(std::vector<double>{0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 4.0}, loose).regime, Regime::conservative);
}

TEST(Regime, PublishedModels) {
  std::map<std::string, std::vector<double>> fprs;
  for (const auto& r : published()) fprs[r.model].push_back(r.fpr);
  ASSERT_EQ(fprs.size(), 9u);
  auto regime = [&](const std::string& m) {
    EXPECT_EQ(fprs.at(m).size(), 9u);
    return classify_regime(fprs.at(m));
  };
  auto opus = regime("Claude-opus-4.6");
  EXPECT_NEAR(opus.f_avg, 0.2007, 1e-4);
  EXPECT_DOUBLE_EQ(opus.f_max, 0.852);
  EXPECT_EQ(opus.regime, Regime::conservative);
  EXPECT_EQ(regime("Claude-sonnet-4").regime, Regime::conservative);
  auto s45 = regime("Claude-sonnet-4.5");
  EXPECT_NEAR(s45.f_avg, 0.312, 1e-3);
  EXPECT_EQ(s45.regime, Regime::balanced);
  EXPECT_EQ(regime("GPT-oss-120b").regime, Regime::balanced);
  EXPECT_EQ(regime("Qwen3.6-plus").regime, Regime::balanced);
  EXPECT_EQ(regime("Gemini-2.5-Flash").regime, Regime::over_sensitive);
  EXPECT_EQ(regime("GPT-4.1").regime, Regime::over_sensitive);
  EXPECT_EQ(regime("DeepSeek-V3.2").regime, Regime::over_sensitive);
}

TEST(Costs, EmptyLedger) {
  EXPECT_TRUE(account_costs({}, {}).empty());
}

TEST(Costs, SingleOpusCall) {
  llm::ModelEndpoint opus;
  opus.name = "claude-opus-4.6";
  opus.price_per_1k_prompt = llm::Money::parse("0.005");
  opus.price_per_1k_completion = llm::Money::parse("0.025");
  PriceTable prices;
  prices.add(opus);
  llm::LedgerEntry e{"claude-opus-4.6", "e3-cadets", "acr", 0, {24'901, 1'309, 26'210, 30.0, llm::Money{}}};
  auto rows = account_costs({e}, prices);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].total_cost.to_string(), "0.15723");
  EXPECT_EQ(rows[0].mean_cost().to_string(), "0.15723");
  EXPECT_EQ(rows[0].calls, 1u);
  EXPECT_DOUBLE_EQ(rows[0].mean_time_s(), 30.0);
  e.model = "unpriced";
  EXPECT_THROW(account_costs({e}, prices), ConfigError);
}

TEST(Costs, SummationOracle) {
  std::mt19937_64 rng(10);
  PriceTable prices;
  prices.per_1k["a"] = {llm::Money::parse("0.003"), llm::Money::parse("0.015")};
  prices.per_1k["b"] = {llm::Money::parse("0.0001"), llm::Money::parse("0.0004")};
  std::vector<llm::LedgerEntry> ledger;
  std::map<std::pair<std::string, std::string>, std::pair<long double, int>> want;
  for (int i = 0; i < 10; ++i) {
    llm::LedgerEntry e;
    e.model = rng() % 2 ? "a" : "b";
    e.dataset = rng() % 2 ? "x" : "y";
    e.usage.prompt_tokens = static_cast<std::int64_t>(rng() % 100'000);
    e.usage.completion_tokens = static_cast<std::int64_t>(rng() % 5'000);
    e.usage.cost = llm::Money::parse("999");  // recorded costs are ignored
    ledger.push_back(e);
    const bool a = e.model == "a";
    const long double cost = (static_cast<long double>(e.usage.prompt_tokens) * (a ? 0.003L : 0.0001L) +
                              static_cast<long double>(e.usage.completion_tokens) * (a ? 0.015L : 0.0004L)) /
                             1000;
    auto& w = want[{e.model, e.dataset}];
    w.first += cost;
    w.second += 1;
  }
  auto rows = account_costs(ledger, prices);
  ASSERT_EQ(rows.size(), want.size());
  auto it = want.begin();
  for (const auto& r : rows) {
    EXPECT_EQ(std::pair(r.model, r.dataset), it->first);
    EXPECT_EQ(static_cast<int>(r.calls), it->second.second);
    EXPECT_NEAR(r.total_cost.to_double(), static_cast<double>(it->second.first), 1e-8);
    ++it;
  }
}
