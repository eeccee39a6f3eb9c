#pragma once

// Attack-centric windows: the labelled attack interval plus benign context of
// equal duration on both sides, and the token budget that bounds them.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <istream>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hidbench/error.hpp"
#include "hidbench/ingest.hpp"

namespace hidbench::segment {

class AttackInterval {
 public:
  static AttackInterval make(std::int64_t t_s, std::int64_t t_e) {
    if (t_s < 0) throw IntervalError("attack interval start is negative");
    if (t_e <= t_s)
      throw IntervalError("attack interval requires t_s < t_e, got [" +
                          std::to_string(t_s) + ", " + std::to_string(t_e) + "]");
    return AttackInterval(t_s, t_e);
  }

  static AttackInterval from(const GroundTruth& gt) { return make(gt.t_s, gt.t_e); }

  std::int64_t t_s() const noexcept { return t_s_; }
  std::int64_t t_e() const noexcept { return t_e_; }
  std::int64_t delta_t() const noexcept { return t_e_ - t_s_; }

  // Context bounds. The lower bound is clipped at 0; the upper saturates.
  std::int64_t context_begin() const noexcept {
    return std::max<std::int64_t>(0, t_s_ - delta_t());
  }
  std::int64_t context_end() const noexcept {
    const auto max = std::numeric_limits<std::int64_t>::max();
    return t_e_ > max - delta_t() ? max : t_e_ + delta_t();
  }

  friend bool operator==(const AttackInterval&, const AttackInterval&) = default;

 private:
  AttackInterval(std::int64_t s, std::int64_t e) : t_s_(s), t_e_(e) {}
  std::int64_t t_s_;
  std::int64_t t_e_;
};

enum class Segment { pre, attack, post };

inline const char* to_string(Segment s) {
  switch (s) {
    case Segment::pre: return "pre";
    case Segment::attack: return "attack";
    case Segment::post: return "post";
  }
  return "?";
}

// Which segment a timestamp belongs to, if any:
//   pre    [t_s - dt, t_s)
//   attack [t_s, t_e]
//   post   (t_e, t_e + dt]
inline std::optional<Segment> classify(const AttackInterval& iv, std::int64_t ts) {
  if (ts >= iv.context_begin() && ts < iv.t_s()) return Segment::pre;
  if (ts >= iv.t_s() && ts <= iv.t_e()) return Segment::attack;
  if (ts > iv.t_e() && ts <= iv.context_end()) return Segment::post;
  return std::nullopt;
}

struct AttackWindow {
  AttackInterval interval = AttackInterval::make(0, 1);
  std::vector<Event> pre;
  std::vector<Event> attack;
  std::vector<Event> post;
  std::int64_t token_estimate = 0;

  std::size_t size() const noexcept { return pre.size() + attack.size() + post.size(); }

  // pre || attack || post, which is timestamp-sorted.
  std::vector<Event> events() const {
    std::vector<Event> out;
    out.reserve(size());
    out.insert(out.end(), pre.begin(), pre.end());
    out.insert(out.end(), attack.begin(), attack.end());
    out.insert(out.end(), post.begin(), post.end());
    return out;
  }

  friend bool operator==(const AttackWindow&, const AttackWindow&) = default;
};

using TokenEstimator = std::function<std::int64_t(std::string_view)>;

// ceil(chars / chars_per_token).
inline std::int64_t estimate_tokens_by_chars(std::string_view s,
                                             std::int64_t chars_per_token = 4) {
  const auto n = static_cast<std::int64_t>(s.size());
  return (n + chars_per_token - 1) / chars_per_token;
}

inline TokenEstimator default_estimator() {
  return [](std::string_view s) { return estimate_tokens_by_chars(s, 4); };
}

inline std::string window_to_jsonl(const AttackWindow& w) {
  std::string out;
  auto emit = [&](const std::vector<Event>& evs, Segment seg) {
    for (const auto& ev : evs) {
      auto j = ingest::to_json(ev);
      j["segment"] = to_string(seg);
      out += j.dump() + "\n";
    }
  };
  emit(w.pre, Segment::pre);
  emit(w.attack, Segment::attack);
  emit(w.post, Segment::post);
  return out;
}

inline std::int64_t estimate_tokens(const AttackWindow& w,
                                    const TokenEstimator& estimator = default_estimator()) {
  return estimator(window_to_jsonl(w));
}

// `events` must be sorted (EventLog invariant).
inline AttackWindow build_attack_window(const std::vector<Event>& events,
                                        const AttackInterval& interval,
                                        const TokenEstimator& estimator = default_estimator()) {
  AttackWindow w;
  w.interval = interval;
  for (const auto& ev : events) {
    const auto seg = classify(interval, ev.timestamp_ns);
    if (!seg) continue;
    switch (*seg) {
      case Segment::pre: w.pre.push_back(ev); break;
      case Segment::attack: w.attack.push_back(ev); break;
      case Segment::post: w.post.push_back(ev); break;
    }
  }
  w.token_estimate = estimate_tokens(w, estimator);
  return w;
}

inline AttackWindow build_attack_window(const EventLog& log, const AttackInterval& interval,
                                        const TokenEstimator& estimator = default_estimator()) {
  return build_attack_window(log.events, interval, estimator);
}

struct BudgetViolation {
  std::int64_t estimate = 0;
  std::int64_t limit = 0;
  std::size_t events = 0;

  json to_json() const {
    return json{{"violation", "token_budget"},
                {"estimate", estimate},
                {"limit", limit},
                {"events", events}};
  }
};

inline std::optional<BudgetViolation> check_budget(const AttackWindow& w, std::int64_t limit) {
  if (w.token_estimate <= limit) return std::nullopt;
  return BudgetViolation{w.token_estimate, limit, w.size()};
}

namespace detail {

// Window with the `removed` outermost context events dropped, alternating
// between the far end of post and the far start of pre (larger side first).
inline AttackWindow drop_context(const AttackWindow& w, std::size_t removed,
                                 const TokenEstimator& estimator) {
  AttackWindow out = w;
  std::size_t pre_drop = 0, post_drop = 0;
  for (std::size_t i = 0; i < removed; ++i) {
    const auto pre_left = w.pre.size() - pre_drop;
    const auto post_left = w.post.size() - post_drop;
    if (post_left >= pre_left && post_left > 0)
      ++post_drop;
    else if (pre_left > 0)
      ++pre_drop;
  }
  out.pre.erase(out.pre.begin(), out.pre.begin() + static_cast<std::ptrdiff_t>(pre_drop));
  out.post.resize(out.post.size() - post_drop);
  out.token_estimate = estimate_tokens(out, estimator);
  return out;
}

}  // namespace detail

// Tail-trim: removes the fewest outer context events that bring the window
// under `limit`. The attack segment is never trimmed; if it alone exceeds the
// limit a BudgetError is thrown.
inline AttackWindow trim_to_budget(const AttackWindow& w, std::int64_t limit,
                                   const TokenEstimator& estimator = default_estimator()) {
  if (w.token_estimate <= limit) return w;
  const std::size_t context = w.pre.size() + w.post.size();
  auto bare = detail::drop_context(w, context, estimator);
  if (bare.token_estimate > limit)
    throw BudgetError("attack segment alone exceeds the token budget",
                      bare.token_estimate, limit);
  std::size_t lo = 0, hi = context;  // hi always fits
  while (lo < hi) {
    const auto mid = lo + (hi - lo) / 2;
    if (detail::drop_context(w, mid, estimator).token_estimate <= limit)
      hi = mid;
    else
      lo = mid + 1;
  }
  return detail::drop_context(w, hi, estimator);
}

// Reads a window dump back. Each event's segment tag must agree with its
// timestamp under `interval`.
inline AttackWindow read_window_jsonl(std::istream& in, const AttackInterval& interval,
                                      const std::string& src = "window",
                                      const TokenEstimator& estimator = default_estimator()) {
  AttackWindow w;
  w.interval = interval;
  ingest::detail::for_each_json_line(in, src, [&](const json& j, std::size_t line) {
    auto tag = ingest::detail::req_string(j, "segment", src, line);
    auto ev = ingest::event_from_json(j, src, line);
    auto seg = classify(interval, ev.timestamp_ns);
    if (!seg || tag != to_string(*seg))
      throw ParseError(src, line, "event '" + ev.event_id + "' tagged '" + tag +
                                      "' does not belong to that segment");
    switch (*seg) {
      case Segment::pre: w.pre.push_back(std::move(ev)); break;
      case Segment::attack: w.attack.push_back(std::move(ev)); break;
      case Segment::post: w.post.push_back(std::move(ev)); break;
    }
  });
  for (auto* seg : {&w.pre, &w.attack, &w.post}) {
    if (!std::is_sorted(seg->begin(), seg->end(), event_order))
      throw ParseError(src, 0, "window events are not timestamp-sorted");
  }
  w.token_estimate = estimate_tokens(w, estimator);
  return w;
}

inline json window_meta(const AttackWindow& w) {
  return json{{"t_s", w.interval.t_s()},
              {"t_e", w.interval.t_e()},
              {"delta_t", w.interval.delta_t()},
              {"token_estimate", w.token_estimate},
              {"pre", w.pre.size()},
              {"attack", w.attack.size()},
              {"post", w.post.size()}};
}

}  // namespace hidbench::segment
