#pragma once

#include <stdexcept>
#include <string>

namespace volnet {

// Error taxonomy mirrored by the CLI exit codes:
//   ConfigError -> 2, DataError -> 3, NumericError -> 4.
class Error : public std::runtime_error {
public:
    Error(std::string category, const std::string& what)
        : std::runtime_error(what), category_(std::move(category)) {}

    const std::string& category() const noexcept { return category_; }

private:
    std::string category_;
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error("config", what) {}
    static constexpr int exit_code = 2;
};

class DataError : public Error {
public:
    explicit DataError(const std::string& what) : Error("data", what) {}
    static constexpr int exit_code = 3;
};

class NumericError : public Error {
public:
    explicit NumericError(const std::string& what) : Error("numeric", what) {}
    static constexpr int exit_code = 4;
};

}  // namespace volnet
