#pragma once

#include <stdexcept>
#include <string>

namespace depthedge {

/// Failure categories. The CLI maps each one to its own exit code.
enum class ErrorKind {
    Shape,
    Input,
    Parse,
    Numeric,
    ConfigMismatch,
    Io,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

inline Error shape_error(const std::string& msg) { return Error(ErrorKind::Shape, msg); }
inline Error input_error(const std::string& msg) { return Error(ErrorKind::Input, msg); }
inline Error parse_error(const std::string& msg) { return Error(ErrorKind::Parse, msg); }
inline Error numeric_error(const std::string& msg) { return Error(ErrorKind::Numeric, msg); }
inline Error io_error(const std::string& msg) { return Error(ErrorKind::Io, msg); }

}  // namespace depthedge
