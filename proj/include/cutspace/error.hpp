#pragma once

#include <stdexcept>
#include <string>

namespace cutspace {

// Base class for all library errors.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input document (bad JSON, wrong field types, ...).
struct ParseError : Error {
    explicit ParseError(const std::string& msg) : Error("parse error: " + msg) {}
};

// A structural invariant does not hold. The message names the invariant.
struct ValidationError : Error {
    explicit ValidationError(const std::string& msg) : Error("validation error: " + msg) {}
};

// A configured size guard was exceeded (combinatorial blow-up).
struct CapExceeded : Error {
    explicit CapExceeded(const std::string& msg) : Error("cap exceeded: " + msg) {}
};

// Numeric evaluation cannot proceed (missing CPTs, missing evidence, zero normalizer).
struct EvalError : Error {
    explicit EvalError(const std::string& msg) : Error("evaluation error: " + msg) {}
};

} // namespace cutspace
