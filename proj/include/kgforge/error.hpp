#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace kgforge {

// Input data that cannot be decoded (bad line, bad header, bad UTF-8).
class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

// File could not be opened, read or written.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Inputs are individually well formed but inconsistent with each other,
// e.g. evaluating a checkpoint against triples from another vocabulary.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace kgforge
