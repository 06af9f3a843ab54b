// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace xici {

/// Invalid configuration or arguments (CLI exit code 2).
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Malformed or inconsistent input data (CLI exit code 3).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The requested analysis has nothing to operate on, e.g. no mixed questions (CLI exit code 4).
class NotApplicableError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace xici
