#pragma once

#include <stdexcept>
#include <string>

namespace sead {

/// A caller broke a documented precondition (stepping a closed session,
/// recording an Ongoing outcome, stale log-probabilities, ...).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Malformed input file or value.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, int line = 0)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}

  int line() const noexcept { return line_; }

 private:
  int line_;
};

}  // namespace sead
