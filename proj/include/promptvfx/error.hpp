#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace pvfx {

// Root of every error thrown by the library. kind() is a stable short name
// used by the CLI and the HTTP layer when reporting diagnostics.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error("IoError", what) {}
};

// A required property is missing or the header is malformed.
class FormatError : public Error {
 public:
  explicit FormatError(std::string field)
      : Error("FormatError", "FormatError(" + field + ")"), field_(std::move(field)) {}
  FormatError(std::string field, const std::string& detail)
      : Error("FormatError", "FormatError(" + field + "): " + detail), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class DataError : public Error {
 public:
  DataError(std::size_t index, const std::string& detail)
      : Error("DataError", "DataError at splat " + std::to_string(index) + ": " + detail),
        index_(index) {}
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

class MaskError : public Error {
 public:
  MaskError(long long value, const std::string& detail)
      : Error("MaskError", "MaskError(" + std::to_string(value) + "): " + detail), value_(value) {}
  long long value() const noexcept { return value_; }

 private:
  long long value_;
};

class EmptySelectionError : public Error {
 public:
  EmptySelectionError() : Error("EmptySelectionError", "selection mask is empty") {}
};

struct SourceLocation {
  int line = 1;
  int column = 1;
  std::string str() const { return std::to_string(line) + ":" + std::to_string(column); }
};

class ParseError : public Error {
 public:
  ParseError(SourceLocation loc, const std::string& msg)
      : Error("ParseError", loc.str() + ": " + msg), loc_(loc), message_(msg) {}
  SourceLocation location() const noexcept { return loc_; }
  const std::string& message() const noexcept { return message_; }

 private:
  SourceLocation loc_;
  std::string message_;
};

class TypeError : public Error {
 public:
  TypeError(SourceLocation loc, const std::string& msg)
      : Error("TypeError", loc.str() + ": " + msg), loc_(loc), message_(msg) {}
  SourceLocation location() const noexcept { return loc_; }
  const std::string& message() const noexcept { return message_; }

 private:
  SourceLocation loc_;
  std::string message_;
};

class TimeRangeError : public Error {
 public:
  TimeRangeError(double t, double duration)
      : Error("TimeRangeError", "t=" + std::to_string(t) + " outside [0, " +
                                    std::to_string(duration) + "]") {}
};

class BadIntervalError : public Error {
 public:
  explicit BadIntervalError(const std::string& what) : Error("BadIntervalError", what) {}
};

class PhaseGapError : public Error {
 public:
  PhaseGapError(double end, double next_start)
      : Error("PhaseGapError", "gap between " + std::to_string(end) + " and " +
                                   std::to_string(next_start)),
        end_(end), next_start_(next_start) {}
  double end() const noexcept { return end_; }
  double next_start() const noexcept { return next_start_; }

 private:
  double end_, next_start_;
};

class PhaseOverlapError : public Error {
 public:
  PhaseOverlapError(double end, double next_start)
      : Error("PhaseOverlapError", "phase ending at " + std::to_string(end) +
                                       " overlaps phase starting at " + std::to_string(next_start)),
        end_(end), next_start_(next_start) {}
  double end() const noexcept { return end_; }
  double next_start() const noexcept { return next_start_; }

 private:
  double end_, next_start_;
};

class ArgumentError : public Error {
 public:
  explicit ArgumentError(const std::string& what) : Error("ArgumentError", what) {}
};

// A pipeline stage gave up. stage() is one of design, behavior, codegen,
// scoring, refine, render, transport.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& detail)
      : Error("StageError", "StageError(" + stage + "): " + detail), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

// Replay transport could not find a recorded exchange.
class ReplayMissError : public Error {
 public:
  explicit ReplayMissError(std::string hash)
      : Error("ReplayMissError", "no recorded exchange for request " + hash), hash_(std::move(hash)) {}
  const std::string& hash() const noexcept { return hash_; }

 private:
  std::string hash_;
};

class TransportError : public Error {
 public:
  explicit TransportError(const std::string& what) : Error("TransportError", what) {}
};

class MetricError : public Error {
 public:
  explicit MetricError(const std::string& what) : Error("MetricError", what) {}
};

}  // namespace pvfx
