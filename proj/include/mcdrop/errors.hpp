#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mcdrop {

// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Shapes that do not line up (matrix products, input widths, mask sizes).
class DimensionError : public Error {
public:
    using Error::Error;
};

// A caller-supplied argument or configuration value is out of its domain.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

class NotPositiveDefinite : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class FormatError : public Error {
public:
    using Error::Error;
};

// Training produced a non-finite loss.
class DivergenceError : public Error {
public:
    DivergenceError(std::size_t epoch, const std::string& what)
        : Error(what), epoch_(epoch) {}

    std::size_t epoch() const noexcept { return epoch_; }

private:
    std::size_t epoch_;
};

enum class CsvErrorKind { EmptyFile, Schema, MalformedRow, NonNumeric };

class CsvError : public Error {
public:
    CsvError(CsvErrorKind kind, std::size_t line, const std::string& what)
        : Error(what), kind_(kind), line_(line) {}

    CsvErrorKind kind() const noexcept { return kind_; }
    // 1-based line in the file; 0 when the error is not tied to a line.
    std::size_t line() const noexcept { return line_; }

private:
    CsvErrorKind kind_;
    std::size_t line_;
};

}  // namespace mcdrop
