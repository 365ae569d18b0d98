#pragma once

#include <stdexcept>
#include <string>

namespace ecf {

enum class ErrorKind {
    dimension,
    parse,
    config,
    numeric,
    io,
};

inline const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::dimension: return "dimension";
        case ErrorKind::parse: return "parse";
        case ErrorKind::config: return "config";
        case ErrorKind::numeric: return "numeric";
        case ErrorKind::io: return "io";
    }
    return "unknown";
}

/// Single exception type for the library; `kind()` drives the CLI exit code.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

inline Error dimension_error(const std::string& what) { return {ErrorKind::dimension, what}; }
inline Error parse_error(const std::string& what) { return {ErrorKind::parse, what}; }
inline Error config_error(const std::string& what) { return {ErrorKind::config, what}; }
inline Error numeric_error(const std::string& what) { return {ErrorKind::numeric, what}; }
inline Error io_error(const std::string& what) { return {ErrorKind::io, what}; }

/// Writes "warning: ..." to stderr unless warnings are silenced.
void warn(const std::string& message);
void set_warnings_enabled(bool enabled);

}  // namespace ecf
