#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace marn {

// Base of every error the library raises.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Incompatible tensor or parameter extents.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Caller broke a documented precondition.
class ContractViolation : public Error {
 public:
  using Error::Error;
};

// Bad configuration value (out-of-range lambda, negative beta, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Input data is missing or inconsistent (unresolved ids, missing files, digest mismatch).
class DataError : public Error {
 public:
  using Error::Error;
};

// File does not follow its binary format (magic, version, invariants).
class FormatError : public DataError {
 public:
  using DataError::DataError;
};

// File is truncated or otherwise damaged; carries the byte offset where reading failed.
class CorruptionError : public DataError {
 public:
  CorruptionError(const std::string& what, std::uint64_t offset)
      : DataError(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}
  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

// Training produced a non-finite value.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace marn
