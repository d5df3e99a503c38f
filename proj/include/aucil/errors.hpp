#pragma once

#include <stdexcept>
#include <string>

namespace aucil {

// Base of every error the library throws, so callers can catch one type
// at the process edge and still report the specific condition.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Broken precondition or dimension mismatch: a caller bug, not bad data.
class ContractViolation final : public Error {
 public:
  using Error::Error;
};

// Covariance not positive-definite even after the regularization retry.
class SingularCovarianceError final : public Error {
 public:
  using Error::Error;
};

// Too few samples for the requested fit (|data| < components, empty class).
class InsufficientDataError final : public Error {
 public:
  using Error::Error;
};

// Task id not present in the schedule.
class ScheduleError final : public Error {
 public:
  using Error::Error;
};

// train_task called twice for the same task.
class DuplicateTaskError final : public Error {
 public:
  using Error::Error;
};

// Task-aware inference on a task that has not been learned.
class TaskUnknownError final : public Error {
 public:
  using Error::Error;
};

// Inference before any task has been learned.
class EmptyModelError final : public Error {
 public:
  using Error::Error;
};

// Malformed input file structure (missing columns, duplicate classes, ...).
class SchemaError final : public Error {
 public:
  using Error::Error;
};

// A data row whose label cannot be resolved; message carries the line number.
class RowLabelError final : public Error {
 public:
  using Error::Error;
};

// Dataset cannot be split as requested (e.g. a single subject).
class SplitError final : public Error {
 public:
  using Error::Error;
};

// Model file written by an incompatible format version.
class VersionError final : public Error {
 public:
  using Error::Error;
};

// Unreadable or corrupt file; message carries the byte offset when known.
class ParseError final : public Error {
 public:
  using Error::Error;
};

class IoError final : public Error {
 public:
  using Error::Error;
};

namespace detail {

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ContractViolation(msg);
}

}  // namespace detail

}  // namespace aucil
