#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace robust_coords {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EmptyOverlap : public Error {
 public:
  EmptyOverlap() : Error("configurations share no indices") {}
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class NonFinite : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class DroppedAllIndices : public Error {
 public:
  DroppedAllIndices() : Error("no global index is present in any configuration") {}
};

class NotAntisymmetric : public Error {
 public:
  NotAntisymmetric() : Error("direction matrix is not antisymmetric") {}
};

class NotSymmetric : public Error {
 public:
  NotSymmetric() : Error("distance matrix is not symmetric") {}
};

class TooFewPoints : public Error {
 public:
  using Error::Error;
};

class DegenerateGraph : public Error {
 public:
  using Error::Error;
};

class TooManySimplices : public Error {
 public:
  using Error::Error;
};

class SizeTooLarge : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class DuplicateId : public Error {
 public:
  DuplicateId(long long id, std::size_t line)
      : Error("line " + std::to_string(line) + ": duplicate id " + std::to_string(id)),
        id_(id), line_(line) {}
  long long id() const noexcept { return id_; }
  std::size_t line() const noexcept { return line_; }

 private:
  long long id_;
  std::size_t line_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace robust_coords
