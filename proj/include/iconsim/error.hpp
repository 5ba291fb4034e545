#pragma once

#include <stdexcept>
#include <string>

namespace iconsim {

enum class Errc {
    io,
    parse,
    duplicate_id,
    invalid_argument,
    dimension_mismatch,
    non_finite,
    model,
    unsupported_normalization,
    incomparable,
    config_mismatch,
    not_found,
    format,
};

inline const char* to_string(Errc code) {
    switch (code) {
        case Errc::io: return "io";
        case Errc::parse: return "parse";
        case Errc::duplicate_id: return "duplicate_id";
        case Errc::invalid_argument: return "invalid_argument";
        case Errc::dimension_mismatch: return "dimension_mismatch";
        case Errc::non_finite: return "non_finite";
        case Errc::model: return "model";
        case Errc::unsupported_normalization: return "unsupported_normalization";
        case Errc::incomparable: return "incomparable";
        case Errc::config_mismatch: return "config_mismatch";
        case Errc::not_found: return "not_found";
        case Errc::format: return "format";
    }
    return "unknown";
}

/// Every failure in the library surfaces as this exception; `code()` is stable
/// and used by the CLI for machine-readable error output.
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

}  // namespace iconsim
