#pragma once

#include <stdexcept>
#include <string>

namespace wsod {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class MissingProposalFile : public Error {
 public:
  using Error::Error;
};

class NonFiniteScore : public Error {
 public:
  using Error::Error;
};

class MissingClassEmbedding : public Error {
 public:
  using Error::Error;
};

// No token of the input has an embedding.
class EmptyInput : public Error {
 public:
  using Error::Error;
};

class ShapeMismatch : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace wsod
