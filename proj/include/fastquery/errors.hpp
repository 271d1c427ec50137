#pragma once

#include <stdexcept>
#include <string>

namespace fastquery {

/// Base class for all library errors.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Operand shapes or lengths do not agree.
struct DimensionError : Error {
  using Error::Error;
};

/// A value lies outside the domain an operation accepts.
struct DomainError : Error {
  using Error::Error;
};

/// A signed value does not fit the slot or code range it was given.
struct RangeError : Error {
  using Error::Error;
};

/// A slot layout cannot be built (e.g. it overflows the plaintext width).
struct LayoutError : Error {
  using Error::Error;
};

/// Channel width counts cannot be arranged into the requested groups.
struct AssignmentError : Error {
  using Error::Error;
};

/// Tracked ciphertext noise reached delta/2; decryption would be garbage.
struct NoiseBudgetError : Error {
  using Error::Error;
};

/// A serialized blob is malformed (bad magic, truncation, parameter clash).
struct FormatError : Error {
  using Error::Error;
};

/// A packed coefficient has a set guard bit where none is allowed.
struct CorruptCoefficientError : Error {
  using Error::Error;
};

/// A protocol message or reconstructed share violates the protocol contract.
struct ProtocolError : Error {
  using Error::Error;
};

/// The requested problem size exceeds the supported parameter envelope.
struct UnsupportedScaleError : Error {
  using Error::Error;
};

/// A run configuration is inconsistent or incomplete.
struct ConfigError : Error {
  using Error::Error;
};

}  // namespace fastquery
