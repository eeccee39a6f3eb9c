#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace hidbench {

// Base of every error raised by the library. `what()` is always a complete,
// human-readable message.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input. `line()` is 1-based, 0 when not tied to a line.
class ParseError : public Error {
 public:
  ParseError(std::string source, std::size_t line, const std::string& detail)
      : Error(source + (line ? ":" + std::to_string(line) : std::string{}) +
              ": " + detail),
        source_(std::move(source)),
        line_(line) {}

  const std::string& source() const noexcept { return source_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string source_;
  std::size_t line_;
};

// A reference to an id that does not exist (entity, event, seed node).
class ReferentialError : public Error {
 public:
  ReferentialError(const std::string& what_kind, std::vector<std::string> ids)
      : Error(make_message(what_kind, ids)), missing_(std::move(ids)) {}

  const std::vector<std::string>& missing() const noexcept { return missing_; }

 private:
  static std::string make_message(const std::string& what_kind,
                                   const std::vector<std::string>& ids) {
    std::string msg = "unresolved " + what_kind + ":";
    for (const auto& id : ids) msg += " " + id;
    return msg;
  }

  std::vector<std::string> missing_;
};

class IntervalError : public Error {
 public:
  using Error::Error;
};

// Input does not fit the configured token budget or model context.
class BudgetError : public Error {
 public:
  BudgetError(const std::string& detail, long long estimate, long long limit)
      : Error(detail + " (estimate " + std::to_string(estimate) + " > limit " +
              std::to_string(limit) + ")"),
        estimate_(estimate),
        limit_(limit) {}

  long long estimate() const noexcept { return estimate_; }
  long long limit() const noexcept { return limit_; }

 private:
  long long estimate_;
  long long limit_;
};

// Failure to talk to a model endpoint. Transient failures may be retried.
class TransportError : public Error {
 public:
  TransportError(const std::string& detail, bool transient)
      : Error(detail), transient_(transient) {}

  bool transient() const noexcept { return transient_; }

 private:
  bool transient_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Prompt text would leak a forbidden token (dataset name, label path, ...).
class ContaminationError : public Error {
 public:
  explicit ContaminationError(std::vector<std::string> hits)
      : Error(make_message(hits)), hits_(std::move(hits)) {}

  const std::vector<std::string>& hits() const noexcept { return hits_; }

 private:
  static std::string make_message(const std::vector<std::string>& hits) {
    std::string msg = "prompt contains forbidden tokens:";
    for (const auto& h : hits) msg += " '" + h + "'";
    return msg;
  }

  std::vector<std::string> hits_;
};

// Model output that could not be turned into a structured result. Carries
// the raw text for audit.
class ResponseParseError : public Error {
 public:
  ResponseParseError(const std::string& detail, std::string raw)
      : Error(detail), raw_(std::move(raw)) {}

  const std::string& raw() const noexcept { return raw_; }

 private:
  std::string raw_;
};

class DetectionError : public Error {
 public:
  DetectionError(const std::string& detail, std::vector<std::string> raw_texts)
      : Error(detail), raw_texts_(std::move(raw_texts)) {}

  const std::vector<std::string>& raw_texts() const noexcept {
    return raw_texts_;
  }

 private:
  std::vector<std::string> raw_texts_;
};

}  // namespace hidbench
