#ifndef FTK_ERRORS_HPP_
#define FTK_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace ftk {

// Base class for all library errors. The CLI maps these to exit code 1
// and UsageError to exit code 2.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad argument values (non-positive weights, out-of-range epochs, ...).
class InvalidInput : public Error {
public:
    using Error::Error;
};

// Mismatched vector/matrix dimensions, inconsistent row widths.
class DimensionError : public Error {
public:
    using Error::Error;
};

// A file or dataset with no usable content.
class EmptyInputError : public Error {
public:
    using Error::Error;
};

// Content-level problems: non-finite values, duplicate labels.
class DataError : public Error {
public:
    using Error::Error;
};

// Non-finite values produced during computation.
class NumericError : public Error {
public:
    using Error::Error;
};

// Malformed file content; message carries the 1-based line number.
class ParseError : public Error {
public:
    using Error::Error;
    ParseError(const std::string& path, std::size_t line, const std::string& what)
        : Error(path + ":" + std::to_string(line) + ": " + what) {}
};

class IoError : public Error {
public:
    using Error::Error;
};

// A lookup that found nothing (e.g. no reference entries for a source model).
class LookupError : public Error {
public:
    using Error::Error;
};

// Command-line misuse; exit code 2.
class UsageError : public Error {
public:
    using Error::Error;
};

} // namespace ftk

#endif // FTK_ERRORS_HPP_
