#pragma once

// Chat-completions style HTTP backend:
//
//   POST <base_url>/chat/completions
//   {"model", "messages": [{"role": "user", "content"}], "temperature", "max_tokens", "seed"}
//   -> {"choices": [{"message": {"content"}}], "usage": {"prompt_tokens", "completion_tokens"}}
//
// Define CPPHTTPLIB_OPENSSL_SUPPORT (and link OpenSSL) for https endpoints.

#include <chrono>
#include <cstdlib>
#include <string>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "hidbench/error.hpp"
#include "hidbench/llm/backend.hpp"

namespace hidbench::llm {

struct ParsedUrl {
  std::string scheme_host_port;  // "http://host:port"
  std::string path;              // "" or "/v1"
};

inline ParsedUrl parse_base_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("base_url lacks a scheme: " + url);
  const auto scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") throw ConfigError("unsupported scheme in base_url: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  ParsedUrl out;
  out.scheme_host_port = url.substr(0, path_start);
  if (path_start != std::string::npos) out.path = url.substr(path_start);
  while (!out.path.empty() && out.path.back() == '/') out.path.pop_back();
  return out;
}

inline json chat_request_body(const ModelEndpoint& endpoint, const CompletionRequest& req) {
  return json{{"model", endpoint.name},
              {"messages", json::array({json{{"role", "user"}, {"content", req.prompt}}})},
              {"temperature", req.temperature},
              {"max_tokens", req.max_output_tokens},
              {"seed", req.seed}};
}

class HttpBackend : public Backend {
 public:
  explicit HttpBackend(std::chrono::seconds timeout = std::chrono::seconds(300)) : timeout_(timeout) {}

  RawCompletion complete(const ModelEndpoint& endpoint, const CompletionRequest& req) override {
    const auto url = parse_base_url(endpoint.base_url);
    httplib::Client cli(url.scheme_host_port);
    cli.set_connection_timeout(std::chrono::seconds(10));
    cli.set_read_timeout(timeout_);
    cli.set_write_timeout(timeout_);

    httplib::Headers headers;
    if (!endpoint.auth_env_var.empty()) {
      const char* key = std::getenv(endpoint.auth_env_var.c_str());
      if (!key || !*key)
        throw ConfigError("environment variable " + endpoint.auth_env_var + " is not set");
      headers.emplace("Authorization", std::string("Bearer ") + key);
    }

    const auto started = std::chrono::steady_clock::now();
    auto res = cli.Post(url.path + "/chat/completions", headers,
                        chat_request_body(endpoint, req).dump(), "application/json");
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    if (!res) throw TransportError("request failed: " + httplib::to_string(res.error()), true);

    const int status = res->status;
    if (status == 401 || status == 403)
      throw ConfigError("authentication rejected by '" + endpoint.name + "' (HTTP " +
                        std::to_string(status) + ")");
    if (status == 413 || (status == 400 && (res->body.find("context_length") != std::string::npos ||
                                             res->body.find("maximum context") != std::string::npos)))
      throw BudgetError("endpoint '" + endpoint.name + "' rejected the context length", 0,
                        endpoint.max_context_tokens);
    if (status == 408 || status == 429 || status >= 500)
      throw TransportError("HTTP " + std::to_string(status) + " from '" + endpoint.name + "'", true);
    if (status != 200)
      throw TransportError("HTTP " + std::to_string(status) + " from '" + endpoint.name + "': " + res->body,
                           false);

    json body;
    try {
      body = json::parse(res->body);
    } catch (const json::parse_error& e) {
      throw TransportError(std::string("malformed response body: ") + e.what(), false);
    }
    RawCompletion rc;
    try {
      rc.text = body.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception&) {
      throw TransportError("response lacks choices[0].message.content", false);
    }
    if (auto u = body.find("usage"); u != body.end() && u->is_object()) {
      if (u->contains("prompt_tokens")) rc.prompt_tokens = (*u)["prompt_tokens"].get<std::int64_t>();
      if (u->contains("completion_tokens"))
        rc.completion_tokens = (*u)["completion_tokens"].get<std::int64_t>();
    }
    rc.wall_time_s = wall;
    return rc;
  }

 private:
  std::chrono::seconds timeout_;
};

}  // namespace hidbench::llm
