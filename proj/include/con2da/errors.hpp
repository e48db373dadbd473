#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace con2da {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller broke a documented precondition (shape mismatch, index out of range, ...).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

/// Input is mathematically degenerate for the requested operation (e.g. a zero-norm row).
class DegenerateInput : public Error {
 public:
  using Error::Error;
};

class InvalidHyperparameter : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Malformed binary container. Carries the byte offset and the field being read.
class ParseError : public Error {
 public:
  ParseError(std::uint64_t offset, std::string field, const std::string& what)
      : Error("parse error at byte " + std::to_string(offset) + " (" + field + "): " + what),
        offset_(offset),
        field_(std::move(field)) {}

  std::uint64_t offset() const noexcept { return offset_; }
  const std::string& field() const noexcept { return field_; }

 private:
  std::uint64_t offset_;
  std::string field_;
};

/// Training hit a non-finite loss.
class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace con2da
