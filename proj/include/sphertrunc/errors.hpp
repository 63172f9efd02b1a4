#pragma once

#include <stdexcept>
#include <string>

namespace sphertrunc {

/// Input lies outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Requested configuration is not covered by the available coefficient tables.
class UnsupportedError : public DomainError {
 public:
  using DomainError::DomainError;
};

/// A numerical procedure could not meet its accuracy contract.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller violated a precondition on internal state.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace sphertrunc
