#pragma once

#include <stdexcept>
#include <string>

namespace utilimax {

/// Broad failure categories. The C API maps these one-to-one onto um_status.
enum class ErrorCode {
    InvalidArgument,
    Io,
    Parse,
    Validation,
    Intractable,
    JointTooLarge,
    Estimate,
    Config,
    Provider,
    Data,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& msg) : std::runtime_error(msg), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// Syntax errors in a diagram or task document, with 1-based position.
class SyntaxError : public Error {
public:
    SyntaxError(const std::string& msg, std::size_t line, std::size_t column)
        : Error(ErrorCode::Parse, msg + " (line " + std::to_string(line) + ", column " +
                                      std::to_string(column) + ")"),
          line_(line),
          column_(column) {}

    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }

private:
    std::size_t line_;
    std::size_t column_;
};

}  // namespace utilimax
