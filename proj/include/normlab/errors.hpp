#pragma once

#include <stdexcept>
#include <string>

namespace normlab {

/// Raised when an argument violates an operation's precondition.
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when a ratio would divide by a zero-norm vector.
class DegenerateInput : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Raised by root finders when the target is not bracketed.
class NoRoot : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

namespace detail {

inline void require(bool condition, const std::string& message)
{
    if (!condition) {
        throw InvalidArgument(message);
    }
}

} // namespace detail

} // namespace normlab
