#pragma once

#include <stdexcept>
#include <string>

namespace grasspool {

// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Matrix/vector dimensions do not agree.
class ShapeMismatch : public Error {
 public:
  explicit ShapeMismatch(const std::string& what) : Error(what) {}
};

// Numerical rank is lower than the requested subspace dimension.
class RankDeficient : public Error {
 public:
  explicit RankDeficient(const std::string& what) : Error(what) {}
};

// An input matrix contains NaN or Inf entries.
class NonFinite : public Error {
 public:
  explicit NonFinite(const std::string& what) : Error(what) {}
};

// An objective or gradient callback returned non-finite values.
class CallbackFailure : public Error {
 public:
  explicit CallbackFailure(const std::string& what) : Error(what) {}
};

// Sequence too short for the requested operation (e.g. pairwise ranking).
class DegenerateSequence : public Error {
 public:
  explicit DegenerateSequence(const std::string& what) : Error(what) {}
};

class EmptySequence : public Error {
 public:
  explicit EmptySequence(const std::string& what) : Error(what) {}
};

// Classification requested with fewer than two distinct labels.
class SingleClass : public Error {
 public:
  explicit SingleClass(const std::string& what) : Error(what) {}
};

// Malformed file contents; message carries the line or byte offset.
class ParseError : public Error {
 public:
  explicit ParseError(const std::string& what) : Error(what) {}
};

class DimensionMismatch : public Error {
 public:
  explicit DimensionMismatch(const std::string& what) : Error(what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(what) {}
};

}  // namespace grasspool
