#pragma once

#include <stdexcept>
#include <string>

namespace etfce {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Inputs violate a shape, range or indexing contract.
class StructuralError : public Error {
 public:
  using Error::Error;
};

/// A file does not conform to the format it claims to be.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// A brute-force routine was asked to do more work than it allows.
class BudgetError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace etfce
