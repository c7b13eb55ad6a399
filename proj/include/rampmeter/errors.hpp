#pragma once

#include <stdexcept>
#include <string>

namespace rampmeter {

/// Bad user input: scenario fields, parameters out of range.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Configuration that is well-formed but unusable (e.g. hyperperiod too large).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A file could not be read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller broke an operation's precondition.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Two vehicles occupied the same place. Fatal for a run.
class CollisionError : public std::runtime_error {
 public:
  CollisionError(const std::string& what, long first_id, long second_id)
      : std::runtime_error(what), first_id_(first_id), second_id_(second_id) {}

  long first_id() const noexcept { return first_id_; }
  long second_id() const noexcept { return second_id_; }

 private:
  long first_id_;
  long second_id_;
};

}  // namespace rampmeter
