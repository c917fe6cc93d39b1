#pragma once

#include <stdexcept>
#include <string>

namespace lanemap {

// Input violates a documented invariant (bad vertex, duplicate id, ...).
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed document or binary stream.
class ParseError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

// Filesystem failure.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace lanemap
