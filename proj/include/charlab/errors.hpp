#pragma once

#include <stdexcept>
#include <string>

namespace charlab {

/// Base class for all errors raised by the library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Mismatched vector/matrix/block dimensions.
struct DimensionError : Error {
    using Error::Error;
};

/// An operation's stated precondition does not hold (names the offender).
struct PreconditionError : Error {
    using Error::Error;
};

/// Requested a closed form or construction that does not exist for the input.
struct UnsupportedError : Error {
    using Error::Error;
};

/// Evaluation left the valid domain (grid radius or characteristic-function floor).
struct DomainError : Error {
    using Error::Error;
};

/// Malformed or schema-violating configuration input.
struct ConfigError : Error {
    using Error::Error;
};

} // namespace charlab
