#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <utility>

#include <nlohmann/json.hpp>

#include "hidbench/error.hpp"
#include "hidbench/llm/prompts.hpp"
#include "hidbench/llm/usage.hpp"
#include "hidbench/text.hpp"

namespace hidbench::llm {

struct CompletionRequest {
  std::string prompt;
  PromptKind kind = PromptKind::acr;
  std::size_t sample_index = 0;
  double temperature = 0.0;
  int max_output_tokens = 4096;
  std::uint64_t seed = 0;
};

// What a backend reports. Token counts are optional; the client estimates
// missing ones and measures wall time when none is reported.
struct RawCompletion {
  std::string text;
  std::optional<std::int64_t> prompt_tokens;
  std::optional<std::int64_t> completion_tokens;
  std::optional<double> wall_time_s;
};

class Backend {
 public:
  virtual ~Backend() = default;
  // Throws TransportError (possibly transient), ConfigError on auth failure,
  // BudgetError when the endpoint rejects the context length.
  virtual RawCompletion complete(const ModelEndpoint& endpoint, const CompletionRequest& req) = 0;
};

// Adapts a callable; handy for scripted backends in tests and tools.
class FunctionBackend : public Backend {
 public:
  using Fn = std::function<RawCompletion(const ModelEndpoint&, const CompletionRequest&)>;
  explicit FunctionBackend(Fn fn) : fn_(std::move(fn)) {}
  RawCompletion complete(const ModelEndpoint& e, const CompletionRequest& r) override { return fn_(e, r); }

 private:
  Fn fn_;
};

inline std::string prompt_hash(std::string_view prompt) { return text::hex64(text::fnv1a64(prompt)); }

// Replays stored responses from a fixture directory. For a request with
// prompt hash H, kind K and sample index i the first existing file wins:
//
//   H.i.json  H.json  K.i.json  K.json      (then the same names with .txt)
//
// A .json fixture is {"text": ..., "usage": {"prompt_tokens", "completion_tokens"},
// "wall_time_s": ...} with usage and wall time optional; a .txt fixture is the
// raw response text.
class MockBackend : public Backend {
 public:
  explicit MockBackend(std::filesystem::path dir) : dir_(std::move(dir)) {
    if (!std::filesystem::is_directory(dir_))
      throw ConfigError("mock fixture directory not found: " + dir_.string());
  }

  RawCompletion complete(const ModelEndpoint&, const CompletionRequest& req) override {
    const auto hash = prompt_hash(req.prompt);
    const auto idx = std::to_string(req.sample_index);
    const std::string kind = to_string(req.kind);
    for (const char* ext : {".json", ".txt"}) {
      for (const auto& stem : {hash + "." + idx, hash, kind + "." + idx, kind}) {
        const auto path = dir_ / (stem + ext);
        if (std::filesystem::is_regular_file(path)) return load(path);
      }
    }
    throw ConfigError("no mock fixture for prompt " + hash + " (kind " + kind + ", sample " + idx +
                      ") in " + dir_.string());
  }

  const std::filesystem::path& directory() const noexcept { return dir_; }

 private:
  static RawCompletion load(const std::filesystem::path& path) {
    const auto body = text::read_file(path.string());
    RawCompletion rc;
    rc.wall_time_s = 0.0;
    if (path.extension() == ".txt") {
      rc.text = body;
      return rc;
    }
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(path.string(), 0, std::string("malformed fixture: ") + e.what());
    }
    if (!j.contains("text") || !j["text"].is_string())
      throw ParseError(path.string(), 0, "fixture needs a string 'text'");
    rc.text = j["text"].get<std::string>();
    if (auto u = j.find("usage"); u != j.end()) {
      if (u->contains("prompt_tokens")) rc.prompt_tokens = (*u)["prompt_tokens"].get<std::int64_t>();
      if (u->contains("completion_tokens"))
        rc.completion_tokens = (*u)["completion_tokens"].get<std::int64_t>();
    }
    rc.wall_time_s = j.value("wall_time_s", 0.0);
    return rc;
  }

  std::filesystem::path dir_;
};

}  // namespace hidbench::llm
