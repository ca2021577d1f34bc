#pragma once

#include <stdexcept>
#include <string>

namespace mrtcn {

enum class ErrorKind {
    InvalidArgument,
    Config,
    Io,
    Format,
    Numeric,
};

// All library failures surface as this exception type; the C API maps the
// kind onto its status codes.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

inline void require(bool condition, ErrorKind kind, const std::string& message) {
    if (!condition) {
        throw Error(kind, message);
    }
}

}  // namespace mrtcn
