#pragma once

#include <stdexcept>
#include <string>

namespace fbctl {

enum class ErrorKind {
    config,        // malformed or inconsistent problem/CLI input
    stability,     // explicit scheme refuses the requested grid
    numerical,     // NaN, rank deficiency, failed reductions
    inconclusive,  // a study could not separate signal from grid error
    domain,        // argument outside an operation's domain
};

/// Exception carrying a category and, for config errors, the offending field path.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message, std::string field = {})
        : std::runtime_error(message), kind_(kind), field_(std::move(field)) {}

    ErrorKind kind() const noexcept { return kind_; }
    const std::string& field() const noexcept { return field_; }

private:
    ErrorKind kind_;
    std::string field_;
};

inline const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::config: return "config";
        case ErrorKind::stability: return "stability";
        case ErrorKind::numerical: return "numerical";
        case ErrorKind::inconclusive: return "inconclusive";
        case ErrorKind::domain: return "domain";
    }
    return "unknown";
}

}  // namespace fbctl
