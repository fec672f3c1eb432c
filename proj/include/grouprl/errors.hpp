#pragma once

#include <stdexcept>
#include <string>

namespace grouprl {

// Violated precondition or broken internal invariant. Indicates a caller bug.
class ContractViolation : public std::logic_error {
 public:
  explicit ContractViolation(const std::string& what) : std::logic_error(what) {}
};

// Invalid configuration value or combination.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Overflow, non-finite intermediate, or undefined mathematical result.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed record in a line-oriented file. Carries the 1-based line number.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::string path, long line, const std::string& what)
      : std::runtime_error(path + ":" + std::to_string(line) + ": " + what),
        path_(std::move(path)),
        line_(line) {}

  const std::string& path() const noexcept { return path_; }
  long line() const noexcept { return line_; }

 private:
  std::string path_;
  long line_;
};

// Checksum mismatch on a binary artifact.
class IntegrityError : public std::runtime_error {
 public:
  explicit IntegrityError(const std::string& what) : std::runtime_error(what) {}
};

// Unsupported format version tag.
class VersionError : public std::runtime_error {
 public:
  explicit VersionError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace grouprl
