#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace capfade {

// Base of everything the library throws for bad inputs or configuration.
// Anything else escaping the library is an internal fault.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
    virtual const char* kind() const noexcept = 0;
};

class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& what)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
    const char* kind() const noexcept override { return "parse_error"; }
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class DomainError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "domain_error"; }
};

class ConfigError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "config_error"; }
};

class InsufficientDataError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "insufficient_data"; }
};

// Input carries no usable structure (flat curvature, constant signal).
class DegenerateInputError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "degenerate_input"; }
};

// Missing or unreadable file.
class IoError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "io_error"; }
};

} // namespace capfade
