#pragma once

#include <stdexcept>
#include <string>

#include "mstrack/simulator.hpp"

namespace mstrack {

inline constexpr int kSchemaVersion = 1;

/// Malformed document: bad JSON, wrong types, unknown or missing fields.
/// The message starts with a JSON-pointer path or a line:column location.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::string where, const std::string& message)
      : std::runtime_error(where + ": " + message), where_(std::move(where)) {}
  const std::string& where() const { return where_; }

 private:
  std::string where_;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parses a scenario document. Structural problems throw ParseError; semantic
/// checks are left to validate_scenario.
Scenario parse_scenario(const std::string& text);

Scenario load_scenario_file(const std::string& path);

/// Normalized document with every field spelled out; parses back to the same scenario.
std::string dump_scenario(const Scenario& scenario);

}  // namespace mstrack
