#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace concert {

/// Coarse error category. The CLI prints it as the machine-parsable error code.
enum class ErrorCode {
    invalid_argument,
    io,
    schema_mismatch,
    missing_value,
    unseen_category,
    convergence,
    diverged,
    unsupported,
    bundle,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message);

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

inline void require(bool condition, const std::string& message) {
    if (!condition) fail(ErrorCode::invalid_argument, message);
}

}  // namespace concert
