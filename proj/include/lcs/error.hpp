#ifndef LCS_ERROR_HPP
#define LCS_ERROR_HPP

#include <stdexcept>
#include <string>

namespace lcs {

/// Malformed or out-of-range input data. The CLI maps this to exit code 2.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Singular, rank-deficient or otherwise numerically unusable problem (exit code 3).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad configuration or command-line usage (exit code 1).
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace lcs

#endif // LCS_ERROR_HPP
