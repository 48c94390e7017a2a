#pragma once

#include <stdexcept>
#include <string>

namespace hyperpredict {

// Invalid configuration or arguments (CLI exit code 2).
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Non-finite values, divergence, failed numerical preconditions (CLI exit code 3).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// No feasible row under a strict selection policy (CLI exit code 4).
class InfeasibleSelection : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Generic data/IO failure (missing files, malformed CSV).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace hyperpredict
