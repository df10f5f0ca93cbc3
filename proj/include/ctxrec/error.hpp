#pragma once

#include <stdexcept>
#include <string>

namespace ctxrec {

// Error category drives the CLI exit code and the machine-parsable
// "error: <category>: <detail>" line.
enum class ErrorCategory { Config, Data, Io, Internal };

inline const char* to_string(ErrorCategory c) {
    switch (c) {
        case ErrorCategory::Config: return "config";
        case ErrorCategory::Data: return "data";
        case ErrorCategory::Io: return "io";
        case ErrorCategory::Internal: return "internal";
    }
    return "internal";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, const std::string& msg)
        : std::runtime_error(msg), category_(category) {}

    ErrorCategory category() const { return category_; }

    static Error config(const std::string& msg) { return Error(ErrorCategory::Config, msg); }
    static Error data(const std::string& msg) { return Error(ErrorCategory::Data, msg); }
    static Error io(const std::string& msg) { return Error(ErrorCategory::Io, msg); }
    static Error internal(const std::string& msg) { return Error(ErrorCategory::Internal, msg); }

private:
    ErrorCategory category_;
};

}  // namespace ctxrec
