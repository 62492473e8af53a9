#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace neura {

using Index = std::uint32_t;
using Offset = std::uint64_t;
using Cycle = std::uint64_t;

/// Base class of every error raised by the library. Each subclass maps to
/// one failure family so callers (and the CLI exit codes) can tell them apart.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed input text (Matrix Market, traces, manifests).
class ParseError : public Error {
public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

class DimensionError : public Error {
public:
  using Error::Error;
};

/// Inconsistent configuration or caller policy.
class ConfigError : public Error {
public:
  using Error::Error;
};

/// A row or window does not fit the scratchpad budget.
class CapacityError : public Error {
public:
  using Error::Error;
};

/// Hash table probe sequence exhausted.
class OverflowError : public Error {
public:
  using Error::Error;
};

/// Tag packing or address resolution failed while lowering a program.
class LoweringError : public Error {
public:
  using Error::Error;
};

class MemoryFault : public Error {
public:
  using Error::Error;
};

/// A ratio whose denominator is zero (replication ratio, bloat percent).
class UndefinedMetricError : public Error {
public:
  using Error::Error;
};

class IoError : public Error {
public:
  using Error::Error;
};

/// The cycle engine detected a deadlock or a violated conservation law.
class SimulationError : public Error {
public:
  using Error::Error;
};

}  // namespace neura
