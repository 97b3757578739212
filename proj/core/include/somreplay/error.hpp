#pragma once

#include <stdexcept>
#include <string>

namespace somreplay {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller broke a documented precondition (dimension mismatch, bad range).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// A numerical routine failed (non-convergence, non-PD factorization).
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Malformed or unsupported file contents.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// File system failures (missing file, short write).
class IoError : public Error {
 public:
  using Error::Error;
};

/// Classification could not be performed (e.g. no labeled units).
class InferenceError : public Error {
 public:
  using Error::Error;
};

/// Training diverged or produced non-finite values.
class TrainingError : public Error {
 public:
  using Error::Error;
};

/// Invalid or inconsistent configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

namespace detail {

[[noreturn]] inline void contract_failure(const std::string& what) {
  throw ContractError(what);
}

}  // namespace detail

#define SOMREPLAY_EXPECTS(cond, msg)                                   \
  do {                                                                 \
    if (!(cond)) ::somreplay::detail::contract_failure(msg);           \
  } while (false)

}  // namespace somreplay
