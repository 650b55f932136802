#pragma once

#include <stdexcept>
#include <string>

namespace mealeng {

// Exit codes used by the CLI. Every error type carries one.
enum class ErrorKind : int {
    validation = 1,
    infeasible = 2,
    io = 3,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }
    int exit_code() const noexcept { return static_cast<int>(kind_); }

private:
    ErrorKind kind_;
};

struct ValidationError : Error {
    explicit ValidationError(const std::string& what) : Error(ErrorKind::validation, what) {}
};

// Bad configuration (cyclic code map, invalid thresholds).
struct ConfigError : Error {
    explicit ConfigError(const std::string& what) : Error(ErrorKind::validation, what) {}
};

// Unknown food code and similar resolution failures.
struct LookupError : Error {
    explicit LookupError(const std::string& what) : Error(ErrorKind::validation, what) {}
};

struct PricingError : Error {
    explicit PricingError(const std::string& what) : Error(ErrorKind::validation, what) {}
};

struct InfeasibleError : Error {
    explicit InfeasibleError(const std::string& what) : Error(ErrorKind::infeasible, what) {}
};

struct IoError : Error {
    explicit IoError(const std::string& what) : Error(ErrorKind::io, what) {}
};

}  // namespace mealeng
