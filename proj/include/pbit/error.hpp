#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pbit {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidSizeError : public Error {
 public:
  using Error::Error;
};

class GenerationError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, std::size_t column, const std::string& what)
      : Error(std::to_string(line) + ":" + std::to_string(column) + ": " + what),
        line_(line),
        column_(column) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

class ConventionError : public Error {
 public:
  using Error::Error;
};

class GadgetError : public Error {
 public:
  using Error::Error;
};

class SizeMismatchError : public Error {
 public:
  using Error::Error;
};

class ScheduleOverflowError : public Error {
 public:
  using Error::Error;
};

class NoDataError : public Error {
 public:
  using Error::Error;
};

class DegenerateFitError : public Error {
 public:
  using Error::Error;
};

}  // namespace pbit
