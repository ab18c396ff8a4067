#pragma once

#include <stdexcept>
#include <string>

namespace waveattack {

// Error categories map onto CLI exit codes: Shape/Validation/Config/Format/Usage
// are caller mistakes (exit 1), Io/Runtime are environment failures (exit 2).
enum class ErrorKind {
    Shape,
    Validation,
    Config,
    Format,
    Usage,
    Io,
    Runtime,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}

    ErrorKind kind() const { return kind_; }

    bool user_error() const {
        return kind_ == ErrorKind::Shape || kind_ == ErrorKind::Validation ||
               kind_ == ErrorKind::Config || kind_ == ErrorKind::Format ||
               kind_ == ErrorKind::Usage;
    }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void throw_shape(const std::string& msg) { throw Error(ErrorKind::Shape, msg); }
[[noreturn]] inline void throw_validation(const std::string& msg) { throw Error(ErrorKind::Validation, msg); }
[[noreturn]] inline void throw_config(const std::string& msg) { throw Error(ErrorKind::Config, msg); }
[[noreturn]] inline void throw_format(const std::string& msg) { throw Error(ErrorKind::Format, msg); }
[[noreturn]] inline void throw_usage(const std::string& msg) { throw Error(ErrorKind::Usage, msg); }
[[noreturn]] inline void throw_io(const std::string& msg) { throw Error(ErrorKind::Io, msg); }
[[noreturn]] inline void throw_runtime(const std::string& msg) { throw Error(ErrorKind::Runtime, msg); }

}  // namespace waveattack
