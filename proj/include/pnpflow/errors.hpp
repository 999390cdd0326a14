#pragma once

#include <stdexcept>
#include <string>

namespace pnpflow {

// Base for everything thrown by this library.
class error : public std::runtime_error {
public:
    explicit error(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad inputs: wrong shapes, out-of-range parameters, malformed configs.
// The CLI maps these to exit code 1.
class validation_error : public error {
public:
    using error::error;
};

class shape_error : public validation_error {
public:
    using validation_error::validation_error;
};

class domain_error : public validation_error {
public:
    using validation_error::validation_error;
};

class config_error : public validation_error {
public:
    using validation_error::validation_error;
};

// Failures during execution: divergence, non-finite values, broken files.
// The CLI maps these to exit code 2.
class runtime_failure : public error {
public:
    using error::error;
};

class numeric_error : public runtime_failure {
public:
    using runtime_failure::runtime_failure;
};

class io_error : public runtime_failure {
public:
    using runtime_failure::runtime_failure;
};

}  // namespace pnpflow
