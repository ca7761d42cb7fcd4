#pragma once

#include <stdexcept>
#include <string>

namespace ecpe {

// All failures carry a short machine-parsable class ("io", "parse", ...)
// followed by a human-readable message.
class Error : public std::runtime_error {
 public:
  Error(std::string error_class, const std::string& message)
      : std::runtime_error(error_class + ": " + message),
        class_(std::move(error_class)) {}

  const std::string& error_class() const { return class_; }

 private:
  std::string class_;
};

struct IoError : Error {
  explicit IoError(const std::string& m) : Error("io", m) {}
};

struct ParseError : Error {
  explicit ParseError(const std::string& m) : Error("parse", m) {}
};

struct ValidationError : Error {
  explicit ValidationError(const std::string& m) : Error("validation", m) {}
};

struct FormatError : Error {
  explicit FormatError(const std::string& m) : Error("format", m) {}
};

struct ArgumentError : Error {
  explicit ArgumentError(const std::string& m) : Error("argument", m) {}
};

struct IndexError : Error {
  explicit IndexError(const std::string& m) : Error("index", m) {}
};

struct ContractError : Error {
  explicit ContractError(const std::string& m) : Error("contract", m) {}
};

struct CheckpointError : Error {
  explicit CheckpointError(const std::string& m) : Error("checkpoint", m) {}
};

struct TrainingError : Error {
  explicit TrainingError(const std::string& m) : Error("training", m) {}
};

}  // namespace ecpe
