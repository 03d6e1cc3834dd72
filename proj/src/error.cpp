#include "concert/error.hpp"

namespace concert {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::invalid_argument: return "invalid_argument";
        case ErrorCode::io: return "io";
        case ErrorCode::schema_mismatch: return "schema_mismatch";
        case ErrorCode::missing_value: return "missing_value";
        case ErrorCode::unseen_category: return "unseen_category";
        case ErrorCode::convergence: return "convergence";
        case ErrorCode::diverged: return "diverged";
        case ErrorCode::unsupported: return "unsupported";
        case ErrorCode::bundle: return "bundle";
    }
    return "unknown";
}

Error::Error(ErrorCode code, const std::string& message) : std::runtime_error(message), code_(code) {}

void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace concert
