#pragma once

#include <stdexcept>
#include <string>

namespace gridquad {

// Base of every error thrown by the library. The CLI maps the category to
// an exit code: data problems -> 2, numeric failures -> 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

// ANN line that does not match the standoff grammar.
class ParseError : public DataError {
 public:
  ParseError(std::size_t line, const std::string& what)
      : DataError("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Offsets and surface text disagree.
class IntegrityError : public DataError {
 public:
  using DataError::DataError;
};

// An annotation that parses but breaks the entity/relation schema.
class SchemaError : public DataError {
 public:
  using DataError::DataError;
};

// Entity char span does not fall on token boundaries.
class AlignmentError : public DataError {
 public:
  using DataError::DataError;
};

// Both POS and NEG on the same target/opinion pair.
class ContradictionError : public DataError {
 public:
  using DataError::DataError;
};

class EncodingError : public DataError {
 public:
  using DataError::DataError;
};

class GenerationError : public DataError {
 public:
  using DataError::DataError;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

// Shape or precondition violated by the caller.
class ContractError : public Error {
 public:
  using Error::Error;
};

}  // namespace gridquad
