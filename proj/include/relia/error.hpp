#pragma once

#include <stdexcept>
#include <string>

namespace relia {

/// Raised when caller-supplied data or configuration violates a precondition.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when a numerical routine cannot produce a result (e.g. a
/// factorization that stays indefinite after jitter escalation).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace relia
