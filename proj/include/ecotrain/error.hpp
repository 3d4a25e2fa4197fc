#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ecotrain {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised when a domain invariant or a precondition is violated by the caller.
class InvariantError : public Error {
public:
    using Error::Error;
};

class ValidationError : public Error {
public:
    ValidationError(std::string field, const std::string& message)
        : Error(field + ": " + message), field_(std::move(field)), message_(message) {}

    const std::string& field() const noexcept { return field_; }
    const std::string& message() const noexcept { return message_; }

private:
    std::string field_;
    std::string message_;
};

/// Parse failure in a line-oriented input (CSV, JSONL). `line` is one-based.
class ParseError : public Error {
public:
    ParseError(std::string source, std::size_t line, const std::string& message)
        : Error(source + ":" + std::to_string(line) + ": " + message),
          source_(std::move(source)),
          line_(line) {}

    const std::string& source() const noexcept { return source_; }
    std::size_t line() const noexcept { return line_; }

private:
    std::string source_;
    std::size_t line_;
};

class CounterUnavailable : public Error {
public:
    explicit CounterUnavailable(const std::string& detail)
        : Error("counter unavailable: " + detail) {}
};

class UndefinedEfficiency : public Error {
public:
    using Error::Error;
};

class ProtocolError : public Error {
public:
    using Error::Error;
};

}  // namespace ecotrain
