#pragma once

#include <stdexcept>
#include <string>

namespace pathwise {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class NonFiniteError : public Error {
 public:
  explicit NonFiniteError(const std::string& where)
      : Error("non-finite value encountered in " + where) {}
};

class ConstantColumnError : public Error {
 public:
  explicit ConstantColumnError(int column)
      : Error("column " + std::to_string(column) + " is constant; cannot standardize"),
        column_(column) {}
  int column() const { return column_; }

 private:
  int column_;
};

class NotStandardizedError : public Error {
 public:
  explicit NotStandardizedError(const std::string& detail)
      : Error("design matrix is not standardized: " + detail) {}
};

class EmptySampleError : public Error {
 public:
  EmptySampleError() : Error("weighted sample is empty") {}
};

class AlreadyActiveError : public Error {
 public:
  explicit AlreadyActiveError(int feature)
      : Error("feature " + std::to_string(feature) + " is already active in the cache"),
        feature_(feature) {}
  int feature() const { return feature_; }

 private:
  int feature_;
};

class RankDeficientError : public Error {
 public:
  explicit RankDeficientError(const std::string& detail)
      : Error("rank-deficient problem: " + detail) {}
};

class DegenerateColumnError : public Error {
 public:
  explicit DegenerateColumnError(int column)
      : Error("column " + std::to_string(column) + " is identically zero") {}
};

class NonOrthonormalGroupError : public Error {
 public:
  explicit NonOrthonormalGroupError(int group)
      : Error("group " + std::to_string(group) + " is not orthonormal") {}
};

class NotConvergedError : public Error {
 public:
  explicit NotConvergedError(const std::string& what_failed, int grid_index = -1)
      : Error("solver failed to converge: " + what_failed +
              (grid_index >= 0 ? " (grid index " + std::to_string(grid_index) + ")" : "")),
        grid_index_(grid_index) {}
  int grid_index() const { return grid_index_; }

 private:
  int grid_index_;
};

class NotAdjacentError : public Error {
 public:
  NotAdjacentError(int k, int kp)
      : Error("groups " + std::to_string(k) + " and " + std::to_string(kp) +
              " are not adjacent") {}
};

class GridTooSmallError : public Error {
 public:
  explicit GridTooSmallError(const std::string& detail)
      : Error("grid too small: " + detail) {}
};

class InvalidPathError : public Error {
 public:
  explicit InvalidPathError(const std::string& detail)
      : Error("invalid path request: " + detail) {}
};

class InvalidArgumentError : public Error {
 public:
  explicit InvalidArgumentError(const std::string& detail) : Error(detail) {}
};

class DivergedError : public Error {
 public:
  explicit DivergedError(const std::string& detail)
      : Error("reference solver diverged: " + detail) {}
};

}  // namespace pathwise
