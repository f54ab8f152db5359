#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace netsched {

/// Base of every error the library throws for bad input or impossible requests.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Malformed text input. `line()` is 1-based, 0 when not tied to a line.
class ParseError : public Error {
  public:
    ParseError(std::string what, std::size_t line)
        : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

  private:
    std::size_t line_;
};

/// Well-formed input whose values violate a documented constraint.
class ValidationError : public Error {
  public:
    using Error::Error;
};

/// Bad configuration key or value, reported as `section.key`.
class ConfigError : public Error {
  public:
    ConfigError(const std::string& location, const std::string& what)
        : Error(location + ": " + what), location_(location) {}

    const std::string& location() const noexcept { return location_; }

  private:
    std::string location_;
};

class CapacityExceeded : public Error {
  public:
    using Error::Error;
};

class NotDeployedHere : public Error {
  public:
    using Error::Error;
};

class NoRoute : public Error {
  public:
    using Error::Error;
};

/// The tick loop hit max_ticks; `stuck()` lists containers that never completed.
class SimulationAborted : public Error {
  public:
    SimulationAborted(std::string what, std::vector<std::size_t> stuck)
        : Error(std::move(what)), stuck_(std::move(stuck)) {}

    const std::vector<std::size_t>& stuck() const noexcept { return stuck_; }

  private:
    std::vector<std::size_t> stuck_;
};

} // namespace netsched
