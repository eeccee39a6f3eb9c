#include <gtest/gtest.h>

#include <random>
#include <set>
#include <sstream>

#include "hidbench/segment.hpp"
#include "support.hpp"

using namespace hidbench;
using segment::AttackInterval;

namespace {

Event ev_at(std::int64_t ts, std::string id = {}) {
  Event e;
  e.event_id = id.empty() ? "e" + std::to_string(ts) : id;
  e.timestamp_ns = ts;
  e.event_type = "EVENT_READ";
  e.subject_id = "p";
  return e;
}

std::vector<std::int64_t> stamps(const std::vector<Event>& evs) {
  std::vector<std::int64_t> out;
  for (const auto& e : evs) out.push_back(e.timestamp_ns);
  return out;
}

}  // namespace

TEST(AttackInterval, RejectsDegenerate) {
  EXPECT_THROW(AttackInterval::make(10, 10), IntervalError);
  EXPECT_THROW(AttackInterval::make(10, 5), IntervalError);
  EXPECT_THROW(AttackInterval::make(-1, 5), IntervalError);
  EXPECT_EQ(AttackInterval::make(10, 25).delta_t(), 15);
}

TEST(BuildWindow, HandWorkedRanges) {
  std::vector<Event> evs{ev_at(500), ev_at(1500), ev_at(2500), ev_at(3500)};
  auto w = segment::build_attack_window(evs, AttackInterval::make(1000, 2000));
  EXPECT_EQ(stamps(w.pre), std::vector<std::int64_t>{500});
  EXPECT_EQ(stamps(w.attack), std::vector<std::int64_t>{1500});
  EXPECT_EQ(stamps(w.post), std::vector<std::int64_t>{2500});
  EXPECT_EQ(w.size(), 3u);
}

TEST(BuildWindow, BoundaryInclusivity) {
  // pre [0,1000)  attack [1000,2000]  post (2000,3000]
  std::vector<Event> evs{ev_at(0), ev_at(999), ev_at(1000), ev_at(2000), ev_at(2001), ev_at(3000), ev_at(3001)};
  auto w = segment::build_attack_window(evs, AttackInterval::make(1000, 2000));
  EXPECT_EQ(stamps(w.pre), (std::vector<std::int64_t>{0, 999}));
  EXPECT_EQ(stamps(w.attack), (std::vector<std::int64_t>{1000, 2000}));
  EXPECT_EQ(stamps(w.post), (std::vector<std::int64_t>{2001, 3000}));
}

TEST(BuildWindow, AllInsideAttack) {
  std::vector<Event> evs{ev_at(10), ev_at(12), ev_at(20)};
  auto w = segment::build_attack_window(evs, AttackInterval::make(10, 20));
  EXPECT_TRUE(w.pre.empty());
  EXPECT_TRUE(w.post.empty());
  EXPECT_EQ(w.attack, evs);
}

TEST(BuildWindow, ContextSpansEqualDeltaT) {
  auto iv = AttackInterval::make(5000, 7000);
  EXPECT_EQ(iv.t_s() - iv.context_begin(), iv.delta_t());
  EXPECT_EQ(iv.context_end() - iv.t_e(), iv.delta_t());
}

TEST(BuildWindow, PreClippedAtZero) {
  auto iv = AttackInterval::make(100, 1000);
  EXPECT_EQ(iv.context_begin(), 0);
  std::vector<Event> evs{ev_at(0), ev_at(99)};
  auto w = segment::build_attack_window(evs, iv);
  EXPECT_EQ(w.pre.size(), 2u);
}

TEST(BuildWindow, PartitionAgainstOracle) {
  std::mt19937_64 rng(11);
  for (int round = 0; round < 200; ++round) {
    auto log = testsupport::random_log(rng, 5, 80, 10'000);
    const std::int64_t ts = static_cast<std::int64_t>(rng() % 8000);
    const std::int64_t te = ts + 1 + static_cast<std::int64_t>(rng() % 3000);
    auto iv = AttackInterval::make(ts, te);
    auto w = segment::build_attack_window(log, iv);
    const std::int64_t d = te - ts;
    std::vector<Event> pre, att, post;
    for (const auto& e : log.events) {
      const auto t = e.timestamp_ns;
      if (t >= std::max<std::int64_t>(0, ts - d) && t < ts) pre.push_back(e);
      else if (t >= ts && t <= te) att.push_back(e);
      else if (t > te && t <= te + d) post.push_back(e);
    }
    ASSERT_EQ(w.pre, pre);
    ASSERT_EQ(w.attack, att);
    ASSERT_EQ(w.post, post);
    auto all = w.events();
    ASSERT_TRUE(std::is_sorted(all.begin(), all.end(), event_order));
    std::set<std::string> ids;
    for (const auto& e : all) ASSERT_TRUE(ids.insert(e.event_id).second);

    // Widening the interval keeps every event.
    auto wide = segment::build_attack_window(log, AttackInterval::make(std::max<std::int64_t>(0, ts - 50), te + 50));
    std::set<std::string> wide_ids;
    for (const auto& e : wide.events()) wide_ids.insert(e.event_id);
    for (const auto& id : ids) ASSERT_TRUE(wide_ids.count(id));
  }
}

TEST(EstimateTokens, EmptyWindowIsZero) {
  auto w = segment::build_attack_window(std::vector<Event>{}, AttackInterval::make(1, 2));
  EXPECT_EQ(w.token_estimate, 0);
  EXPECT_EQ(segment::estimate_tokens(w), 0);
}

TEST(EstimateTokens, CeilCharsOverFour) {
  EXPECT_EQ(segment::estimate_tokens_by_chars(std::string(400, 'x')), 100);
  EXPECT_EQ(segment::estimate_tokens_by_chars(std::string(401, 'x')), 101);
  EXPECT_EQ(segment::estimate_tokens_by_chars(""), 0);

  auto e = ev_at(15);
  auto w = segment::build_attack_window(std::vector<Event>{e}, AttackInterval::make(10, 20));
  const auto base = segment::window_to_jsonl(w).size();
  e.cmdline = std::string(400 - base - std::string(R"(,"cmdline":"")").size(), 'a');
  w = segment::build_attack_window(std::vector<Event>{e}, AttackInterval::make(10, 20));
  ASSERT_EQ(segment::window_to_jsonl(w).size(), 400u);
  EXPECT_EQ(w.token_estimate, 100);
}

TEST(EstimateTokens, PluggableAndDeterministic) {
  auto log = testsupport::sample_log();
  auto iv = AttackInterval::make(2'000'000, 3'000'000);
  segment::TokenEstimator per_event = [](std::string_view s) {
    return static_cast<std::int64_t>(std::count(s.begin(), s.end(), '\n'));
  };
  auto w = segment::build_attack_window(log, iv, per_event);
  EXPECT_EQ(w.token_estimate, static_cast<std::int64_t>(w.size()));
  EXPECT_EQ(segment::window_to_jsonl(segment::build_attack_window(log, iv)),
            segment::window_to_jsonl(segment::build_attack_window(log, iv)));
}

TEST(Budget, FlagsOverBudgetWindow) {
  segment::AttackWindow w;
  w.token_estimate = 140'000;
  auto v = segment::check_budget(w, 131'072);
  ASSERT_TRUE(v.has_value());
  EXPECT_EQ(v->estimate, 140'000);
  EXPECT_EQ(v->limit, 131'072);
  EXPECT_EQ(v->to_json().at("violation"), "token_budget");
  w.token_estimate = 131'072;
  EXPECT_FALSE(segment::check_budget(w, 131'072));
}

TEST(Budget, TrimRemovesFewestOuterEvents) {
  std::vector<Event> evs;
  for (int t = 0; t < 300; t += 3) evs.push_back(ev_at(t));
  auto iv = AttackInterval::make(100, 200);
  auto w = segment::build_attack_window(evs, iv);
  const auto limit = w.token_estimate * 3 / 4;
  auto t = segment::trim_to_budget(w, limit);
  EXPECT_LE(t.token_estimate, limit);
  EXPECT_EQ(t.attack, w.attack);
  // Survivors are the innermost context events.
  ASSERT_FALSE(t.pre.empty());
  EXPECT_EQ(t.pre.back(), w.pre.back());
  EXPECT_EQ(t.post.front(), w.post.front());
  // Minimal: one fewer removal would not fit.
  const auto removed = w.size() - t.size();
  ASSERT_GT(removed, 0u);
  EXPECT_GT(segment::detail::drop_context(w, removed - 1, segment::default_estimator()).token_estimate, limit);
  // Under budget is a no-op.
  EXPECT_EQ(segment::trim_to_budget(w, w.token_estimate).size(), w.size());
}

TEST(Budget, TrimCannotCutAttack) {
  std::vector<Event> evs{ev_at(50), ev_at(150), ev_at(250)};
  auto w = segment::build_attack_window(evs, AttackInterval::make(100, 200));
  EXPECT_THROW(segment::trim_to_budget(w, 1), BudgetError);
}

TEST(WindowDump, RoundTripsAndChecksTags) {
  auto log = testsupport::sample_log();
  auto iv = AttackInterval::make(2'000'000, 3'000'000);
  auto w = segment::build_attack_window(log, iv);
  std::istringstream in(segment::window_to_jsonl(w));
  auto back = segment::read_window_jsonl(in, iv);
  EXPECT_EQ(back.pre, w.pre);
  EXPECT_EQ(back.attack, w.attack);
  EXPECT_EQ(back.post, w.post);
  EXPECT_EQ(back.token_estimate, w.token_estimate);

  auto text = segment::window_to_jsonl(w);
  const auto pos = text.find("\"segment\":\"pre\"");
  ASSERT_NE(pos, std::string::npos);
  text.replace(pos, 15, "\"segment\":\"post\"");
  std::istringstream bad(text);
  EXPECT_THROW(segment::read_window_jsonl(bad, iv), ParseError);
}
