#pragma once

#include <stdexcept>
#include <string>

namespace fairtab {

// Exit-code mapping used by the CLI: config/usage -> 2, data/schema -> 3,
// isolation violations -> 4.

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ArgumentError : ConfigError {
    explicit ArgumentError(const std::string& msg) : ConfigError(msg) {}
};

struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

struct SchemaError : DataError {
    explicit SchemaError(const std::string& msg) : DataError(msg) {}
};

struct IntegrityError : DataError {
    explicit IntegrityError(const std::string& msg) : DataError(msg) {}
};

struct DegenerateSubspaceError : DataError {
    explicit DegenerateSubspaceError(const std::string& msg) : DataError(msg) {}
};

struct IsolationError : std::runtime_error {
    explicit IsolationError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace fairtab
