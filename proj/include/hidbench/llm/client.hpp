#pragma once

#include <algorithm>
#include <chrono>
#include <functional>
#include <future>
#include <string>
#include <thread>
#include <vector>

#include "hidbench/error.hpp"
#include "hidbench/llm/backend.hpp"
#include "hidbench/llm/prompts.hpp"
#include "hidbench/llm/usage.hpp"
#include "hidbench/segment.hpp"

namespace hidbench::llm {

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{250};
  double multiplier = 2.0;
};

struct Completion {
  std::string text;
  UsageRecord usage;
  std::string prompt_hash;
};

// Labels attached to ledger entries.
struct CallTag {
  std::string dataset;
  std::string stage;
};

// Model-agnostic client: pre-flight budget check, bounded retries with
// exponential backoff, bounded parallelism across samples, usage accounting.
class Client {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  Client(ModelEndpoint endpoint, Backend& backend, UsageLedger* ledger = nullptr,
         RetryPolicy retry = {}, std::size_t parallelism = 1,
         Sleeper sleeper = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); })
      : endpoint_(std::move(endpoint)),
        backend_(&backend),
        ledger_(ledger),
        retry_(retry),
        parallelism_(std::max<std::size_t>(1, parallelism)),
        sleeper_(std::move(sleeper)) {
    endpoint_.validate();
  }

  const ModelEndpoint& endpoint() const noexcept { return endpoint_; }
  const segment::TokenEstimator& estimator() const noexcept { return estimator_; }

  // Guard enforcing this endpoint's context limit plus the given tokens.
  PromptGuard guard(std::vector<std::string> forbidden = {}) const {
    return PromptGuard{std::move(forbidden), endpoint_.max_context_tokens, estimator_};
  }

  // `n_samples` independent completions of one prompt, in sample order.
  std::vector<Completion> complete(const std::string& prompt, PromptKind kind, int n_samples,
                                   const CallTag& tag = {}) {
    if (n_samples < 1) throw ConfigError("n_samples must be >= 1");
    std::vector<CompletionRequest> reqs;
    for (int i = 0; i < n_samples; ++i) {
      reqs.push_back(request(prompt, kind, static_cast<std::size_t>(i), n_samples > 1));
    }
    return complete_batch(reqs, tag);
  }

  CompletionRequest request(std::string prompt, PromptKind kind, std::size_t sample_index,
                            bool sampled) const {
    CompletionRequest r;
    r.prompt = std::move(prompt);
    r.kind = kind;
    r.sample_index = sample_index;
    r.temperature = sampled ? endpoint_.sampling.temperature : 0.0;
    r.max_output_tokens = endpoint_.sampling.max_output_tokens;
    return r;
  }

  // Runs requests with at most `parallelism` in flight. Results and ledger
  // entries are in request order regardless of completion order.
  std::vector<Completion> complete_batch(const std::vector<CompletionRequest>& reqs,
                                         const CallTag& tag = {}) {
    for (const auto& r : reqs) preflight(r.prompt);
    std::vector<Completion> out(reqs.size());
    for (std::size_t begin = 0; begin < reqs.size(); begin += parallelism_) {
      const auto end = std::min(reqs.size(), begin + parallelism_);
      if (end - begin == 1) {
        out[begin] = run_one(reqs[begin]);
        continue;
      }
      std::vector<std::future<Completion>> futures;
      for (auto i = begin; i < end; ++i)
        futures.push_back(std::async(std::launch::async, [this, &reqs, i] { return run_one(reqs[i]); }));
      for (auto i = begin; i < end; ++i) out[i] = futures[i - begin].get();
    }
    if (ledger_) {
      std::vector<LedgerEntry> entries;
      for (std::size_t i = 0; i < out.size(); ++i)
        entries.push_back({endpoint_.name, tag.dataset, tag.stage.empty() ? to_string(reqs[i].kind) : tag.stage,
                           reqs[i].sample_index, out[i].usage});
      ledger_->append(std::move(entries));
    }
    return out;
  }

 private:
  void preflight(const std::string& prompt) const {
    const auto est = estimator_(prompt);
    if (est > endpoint_.max_context_tokens)
      throw BudgetError("prompt exceeds context of '" + endpoint_.name + "'", est,
                        endpoint_.max_context_tokens);
  }

  Completion run_one(const CompletionRequest& req) {
    auto backoff = retry_.initial_backoff;
    for (int attempt = 1;; ++attempt) {
      try {
        const auto started = std::chrono::steady_clock::now();
        auto raw = backend_->complete(endpoint_, req);
        const double wall = raw.wall_time_s.value_or(
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count());
        const auto pt = raw.prompt_tokens.value_or(estimator_(req.prompt));
        const auto ct = raw.completion_tokens.value_or(estimator_(raw.text));
        return Completion{std::move(raw.text), make_usage(pt, ct, wall, endpoint_),
                          prompt_hash(req.prompt)};
      } catch (const TransportError& e) {
        if (!e.transient() || attempt >= retry_.max_attempts)
          throw TransportError("'" + endpoint_.name + "' failed after " + std::to_string(attempt) +
                                   " attempt(s): " + e.what(),
                               false);
        sleeper_(backoff);
        backoff = std::chrono::milliseconds(
            static_cast<long long>(static_cast<double>(backoff.count()) * retry_.multiplier));
      }
    }
  }

  ModelEndpoint endpoint_;
  Backend* backend_;
  UsageLedger* ledger_;
  RetryPolicy retry_;
  std::size_t parallelism_;
  Sleeper sleeper_;
  segment::TokenEstimator estimator_ = segment::default_estimator();
};

}  // namespace hidbench::llm
