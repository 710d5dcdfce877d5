#pragma once

#include <stdexcept>
#include <string>

namespace hrlfs {

// Base for every failure raised by the library. Callers that only care about
// "something in hrlfs failed" catch this; the CLI maps it to exit code 1.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Bad user input: malformed files, unknown names, violated preconditions.
class InputError : public Error {
public:
  using Error::Error;
};

// Network or remote-service failure (embedding / chat endpoints).
class TransportError : public Error {
public:
  using Error::Error;
};

// Missing or conflicting configuration (credentials, provider flags). The CLI
// reports these as usage errors.
class ConfigError : public Error {
public:
  using Error::Error;
};

// Numerical breakdown (non-finite losses, degenerate metrics).
class NumericError : public Error {
public:
  using Error::Error;
};

}  // namespace hrlfs
