#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace fairelicit {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A conditional rate or prevalence has an empty conditioning cell.
class UndefinedRate : public Error {
 public:
  using Error::Error;
};

class InfeasibleCenter : public Error {
 public:
  using Error::Error;
};

/// Reconstruction hit a near-singular pivot.
class DegenerateGeometry : public Error {
 public:
  using Error::Error;
};

class PartitionSystemError : public Error {
 public:
  using Error::Error;
};

/// A deferred oracle was aborted while a comparison was outstanding.
class SessionAborted : public Error {
 public:
  using Error::Error;
};

/// An answer did not match the pending query id.
class RejectedAnswer : public Error {
 public:
  using Error::Error;
};

class SessionNotFound : public Error {
 public:
  using Error::Error;
};

/// Wraps a failure with the elicitation stage that raised it.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what)
      : Error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

}  // namespace fairelicit
