#pragma once

#include <stdexcept>
#include <string>

namespace headsim {

/// A caller broke a documented precondition.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Query outside the domain of a time series.
class OutOfBounds : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Malformed input file. `field` names the offending key path.
class SchemaError : public std::runtime_error {
 public:
  SchemaError(std::string field, const std::string& message)
      : std::runtime_error(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// A remote reasoning backend timed out or replied with something unusable.
class BackendError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace headsim
