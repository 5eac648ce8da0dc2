#pragma once

#include <cstdint>
#include <exception>
#include <sstream>
#include <string>
#include <string_view>

namespace hetfuse {

// Error taxonomy shared by the whole toolkit. The CLI maps kinds to exit
// codes; tests assert on kinds rather than message text.
enum class ErrorKind {
    Io,         // file missing / unreadable / unwritable
    Format,     // malformed meta / manifest / checkpoint / config file
    Shape,      // declared shape disagrees with payload or peer tensor
    Invariant,  // domain invariant violated (non-binary mask, bad index, ...)
    Config,     // invalid or inconsistent configuration value
    Usage,      // unknown key / bad command line
};

inline const char* to_string(ErrorKind k) {
    switch (k) {
        case ErrorKind::Io: return "io";
        case ErrorKind::Format: return "format";
        case ErrorKind::Shape: return "shape";
        case ErrorKind::Invariant: return "invariant";
        case ErrorKind::Config: return "config";
        case ErrorKind::Usage: return "usage";
    }
    return "unknown";
}

class Error : public std::exception {
public:
    Error(ErrorKind kind, std::string message)
        : kind_(kind), message_(std::move(message)) {
        full_ = std::string(to_string(kind_)) + ": " + message_;
    }

    ErrorKind kind() const { return kind_; }
    const char* what() const noexcept override { return full_.c_str(); }

private:
    ErrorKind kind_;
    std::string message_;
    std::string full_;
};

template <typename... Args>
std::string cat(Args&&... args) {
    std::ostringstream oss;
    (oss << ... << std::forward<Args>(args));
    return oss.str();
}

template <typename... Args>
[[noreturn]] void fail(ErrorKind kind, Args&&... args) {
    throw Error(kind, cat(std::forward<Args>(args)...));
}

template <typename... Args>
void check(bool cond, ErrorKind kind, Args&&... args) {
    if (!cond) fail(kind, std::forward<Args>(args)...);
}

}  // namespace hetfuse
