#pragma once

#include <stdexcept>
#include <string>

namespace netpen {

/// Error categories, mapped 1:1 onto CLI exit codes and the
/// `error[<category>]:` message prefix.
enum class ErrorCategory {
    Usage,     // bad arguments / out-of-range knobs        -> exit 1
    Data,      // parse, manifest, label or IO problems     -> exit 2
    Config,    // inconsistent component configuration      -> exit 2
    Backend,   // detector backend failure                  -> exit 3
    Pipeline,  // streaming / service failure               -> exit 3
};

inline const char* category_name(ErrorCategory c) {
    switch (c) {
        case ErrorCategory::Usage: return "usage";
        case ErrorCategory::Data: return "data";
        case ErrorCategory::Config: return "config";
        case ErrorCategory::Backend: return "backend";
        case ErrorCategory::Pipeline: return "pipeline";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, std::string message)
        : std::runtime_error(std::move(message)), category_(category) {}

    ErrorCategory category() const noexcept { return category_; }

    int exit_code() const noexcept {
        switch (category_) {
            case ErrorCategory::Usage: return 1;
            case ErrorCategory::Data:
            case ErrorCategory::Config: return 2;
            default: return 3;
        }
    }

private:
    ErrorCategory category_;
};

}  // namespace netpen
