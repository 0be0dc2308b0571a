#ifndef VULNGRAPH_ERRORS_HPP
#define VULNGRAPH_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace vulngraph {

/// Malformed input: bad shapes, out-of-range indices, schema violations.
/// The CLI maps this to exit code 2.
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Valid input that the domain cannot handle, e.g. a training split with a
/// single class. The CLI maps this to exit code 3.
class DomainError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A numerically degenerate quantity (zero-norm scoring vector and the like).
class NumericalError : public DomainError {
public:
    using DomainError::DomainError;
};

} // namespace vulngraph

#endif // VULNGRAPH_ERRORS_HPP
