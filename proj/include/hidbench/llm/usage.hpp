#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <mutex>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "hidbench/error.hpp"

namespace hidbench::llm {

using json = nlohmann::json;

// Currency amount held as an integer number of nano-units (1e-9), so price
// arithmetic is exact for any price written with up to nine decimals.
class Money {
 public:
  constexpr Money() = default;

  static constexpr Money from_nanos(std::int64_t n) { return Money(n); }

  // Parses "0.005", "12", "3.25" (no exponent, no sign).
  static Money parse(std::string_view s) {
    if (s.empty()) throw ConfigError("empty currency amount");
    std::int64_t whole = 0, frac = 0;
    int frac_digits = 0;
    bool dot = false;
    for (char c : s) {
      if (c == '.') {
        if (dot) throw ConfigError("invalid currency amount: " + std::string(s));
        dot = true;
        continue;
      }
      if (c < '0' || c > '9') throw ConfigError("invalid currency amount: " + std::string(s));
      if (!dot) {
        whole = whole * 10 + (c - '0');
      } else if (frac_digits < 9) {
        frac = frac * 10 + (c - '0');
        ++frac_digits;
      } else if (c != '0') {
        throw ConfigError("currency amount has more than 9 decimals: " + std::string(s));
      }
    }
    while (frac_digits < 9) {
      frac *= 10;
      ++frac_digits;
    }
    return Money(whole * 1'000'000'000 + frac);
  }

  static Money from_json(const json& j) {
    if (j.is_string()) return parse(j.get<std::string>());
    if (j.is_number()) {
      const double v = j.get<double>();
      if (v < 0 || !std::isfinite(v)) throw ConfigError("currency amount must be >= 0");
      return Money(std::llround(v * 1e9));
    }
    throw ConfigError("currency amount must be a number or string");
  }

  constexpr std::int64_t nanos() const noexcept { return nanos_; }
  double to_double() const noexcept { return static_cast<double>(nanos_) / 1e9; }

  // Shortest exact decimal: "0.15723", "2", "0".
  std::string to_string() const {
    const auto whole = nanos_ / 1'000'000'000;
    auto frac = nanos_ % 1'000'000'000;
    std::string out = std::to_string(whole);
    if (frac == 0) return out;
    std::string digits = std::to_string(frac);
    digits.insert(0, 9 - digits.size(), '0');
    while (!digits.empty() && digits.back() == '0') digits.pop_back();
    return out + "." + digits;
  }

  friend constexpr Money operator+(Money a, Money b) { return Money(a.nanos_ + b.nanos_); }
  Money& operator+=(Money o) {
    nanos_ += o.nanos_;
    return *this;
  }
  friend constexpr bool operator==(Money, Money) = default;
  friend constexpr auto operator<=>(Money, Money) = default;

 private:
  constexpr explicit Money(std::int64_t n) : nanos_(n) {}
  std::int64_t nanos_ = 0;
};

struct SamplingParams {
  double temperature = 0.7;
  int max_output_tokens = 4096;
};

struct ModelEndpoint {
  std::string name;
  std::string base_url;
  std::string auth_env_var;
  std::int64_t max_context_tokens = 131072;
  Money price_per_1k_prompt;
  Money price_per_1k_completion;
  SamplingParams sampling;

  void validate() const {
    if (name.empty()) throw ConfigError("endpoint name is empty");
    if (max_context_tokens <= 0)
      throw ConfigError("endpoint '" + name + "': max_context_tokens must be > 0");
    if (price_per_1k_prompt.nanos() < 0 || price_per_1k_completion.nanos() < 0)
      throw ConfigError("endpoint '" + name + "': prices must be >= 0");
    if (sampling.temperature < 0)
      throw ConfigError("endpoint '" + name + "': temperature must be >= 0");
    if (sampling.max_output_tokens <= 0)
      throw ConfigError("endpoint '" + name + "': max_output_tokens must be > 0");
  }

  static ModelEndpoint from_json(const json& j) {
    ModelEndpoint e;
    e.name = j.value("name", "");
    e.base_url = j.value("base_url", "");
    e.auth_env_var = j.value("auth_env_var", "");
    e.max_context_tokens = j.value("max_context_tokens", std::int64_t{131072});
    if (j.contains("price_per_1k_prompt"))
      e.price_per_1k_prompt = Money::from_json(j["price_per_1k_prompt"]);
    if (j.contains("price_per_1k_completion"))
      e.price_per_1k_completion = Money::from_json(j["price_per_1k_completion"]);
    if (auto s = j.find("sampling"); s != j.end()) {
      e.sampling.temperature = s->value("temperature", e.sampling.temperature);
      e.sampling.max_output_tokens = s->value("max_output_tokens", e.sampling.max_output_tokens);
    }
    e.validate();
    return e;
  }
};

struct UsageRecord {
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
  std::int64_t total_tokens = 0;
  double wall_time_s = 0;
  Money cost;

  friend bool operator==(const UsageRecord&, const UsageRecord&) = default;
};

// cost = (prompt * price_prompt + completion * price_completion) / 1000,
// rounded half-up to the nano-unit.
inline Money token_cost(std::int64_t prompt_tokens, std::int64_t completion_tokens,
                        Money per_1k_prompt, Money per_1k_completion) {
  const __int128 num = static_cast<__int128>(prompt_tokens) * per_1k_prompt.nanos() +
                       static_cast<__int128>(completion_tokens) * per_1k_completion.nanos();
  return Money::from_nanos(static_cast<std::int64_t>((num + 500) / 1000));
}

inline UsageRecord make_usage(std::int64_t prompt_tokens, std::int64_t completion_tokens,
                              double wall_time_s, const ModelEndpoint& endpoint) {
  if (prompt_tokens < 0 || completion_tokens < 0 || wall_time_s < 0)
    throw Error("usage counts must be non-negative");
  return UsageRecord{prompt_tokens, completion_tokens, prompt_tokens + completion_tokens,
                     wall_time_s,
                     token_cost(prompt_tokens, completion_tokens, endpoint.price_per_1k_prompt,
                                endpoint.price_per_1k_completion)};
}

inline json to_json(const UsageRecord& u) {
  return json{{"prompt_tokens", u.prompt_tokens},
              {"completion_tokens", u.completion_tokens},
              {"total_tokens", u.total_tokens},
              {"wall_time_s", u.wall_time_s},
              {"cost", u.cost.to_string()}};
}

struct LedgerEntry {
  std::string model;
  std::string dataset;
  std::string stage;
  std::size_t sample_index = 0;
  UsageRecord usage;
};

// Append-only, shared between concurrent callers.
class UsageLedger {
 public:
  UsageLedger() = default;
  UsageLedger(const UsageLedger&) = delete;
  UsageLedger& operator=(const UsageLedger&) = delete;

  void append(LedgerEntry e) {
    std::lock_guard lock(mu_);
    entries_.push_back(std::move(e));
  }

  void append(std::vector<LedgerEntry> batch) {
    std::lock_guard lock(mu_);
    for (auto& e : batch) entries_.push_back(std::move(e));
  }

  std::vector<LedgerEntry> snapshot() const {
    std::lock_guard lock(mu_);
    return entries_;
  }

  // Entries ordered by (model, dataset, stage, sample); insertion order
  // breaks remaining ties.
  std::vector<LedgerEntry> sorted() const {
    auto out = snapshot();
    std::stable_sort(out.begin(), out.end(), [](const LedgerEntry& a, const LedgerEntry& b) {
      return std::tie(a.model, a.dataset, a.stage, a.sample_index) <
             std::tie(b.model, b.dataset, b.stage, b.sample_index);
    });
    return out;
  }

 private:
  mutable std::mutex mu_;
  std::vector<LedgerEntry> entries_;
};

}  // namespace hidbench::llm
