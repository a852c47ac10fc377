#ifndef ONEA_ERRORS_HPP
#define ONEA_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace onea {

/// Base class of every exception thrown by the library.
class error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operand shapes do not conform.
class dimension_error : public error {
public:
    using error::error;
};

/// A configuration or stream specification is out of range.
class spec_error : public error {
public:
    using error::error;
};

/// Iterative numerics failed (non-convergence, degenerate operand, zero-norm feature).
class numeric_error : public error {
public:
    using error::error;
};

/// Training produced a non-finite loss or parameter.
class training_error : public numeric_error {
public:
    using numeric_error::numeric_error;
};

/// Malformed `.onea` container. `offset()` is the byte position where decoding failed.
class format_error : public error {
public:
    format_error(const std::string& what, std::size_t offset)
        : error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

} // namespace onea

#endif // ONEA_ERRORS_HPP
