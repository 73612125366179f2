// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace intent {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid arguments, malformed config or malformed input files.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A stage was asked to run before the artifacts it consumes exist.
class PrerequisiteError : public Error {
 public:
  using Error::Error;
};

// Network failure or retries exhausted.
class TransportError : public Error {
 public:
  using Error::Error;
};

// Server answered, but not with a usable chat-completions body.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

// Unparseable model output or an undefined metric.
class ParseError : public Error {
 public:
  using Error::Error;
};

class MetricError : public Error {
 public:
  using Error::Error;
};

class TrainingDiverged : public Error {
 public:
  using Error::Error;
};

}  // namespace intent
