#pragma once

#include <cstdio>
#include <stdexcept>
#include <string>

namespace real_schmidt {

/// Short %g rendering for error messages; std::to_string prints tiny residuals as 0.000000.
inline std::string format_real(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

enum class ErrorKind {
    ZeroVector,
    NonFinite,
    NotInS05,
    ReductionFailed,
    StepSizeUnderflow,
    SolveFailed,
    NormalFormFailed,
    InvalidConfig,
    InvalidPattern,
    InvalidInput,
};

inline const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::ZeroVector: return "ZeroVector";
        case ErrorKind::NonFinite: return "NonFinite";
        case ErrorKind::NotInS05: return "NotInS05";
        case ErrorKind::ReductionFailed: return "ReductionFailed";
        case ErrorKind::StepSizeUnderflow: return "StepSizeUnderflow";
        case ErrorKind::SolveFailed: return "SolveFailed";
        case ErrorKind::NormalFormFailed: return "NormalFormFailed";
        case ErrorKind::InvalidConfig: return "InvalidConfig";
        case ErrorKind::InvalidPattern: return "InvalidPattern";
        case ErrorKind::InvalidInput: return "InvalidInput";
    }
    return "Unknown";
}

/// Base exception for every failure raised by the library.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// Raised when a state carries weight on |001> or |100> and cannot be read as a point of S0^5.
class NotInS05Error : public Error {
public:
    NotInS05Error(double u001, double u100)
        : Error(ErrorKind::NotInS05, "|u001| = " + format_real(u001) +
                                         ", |u100| = " + format_real(u100)),
          u001_(u001), u100_(u100) {}

    double u001() const noexcept { return u001_; }
    double u100() const noexcept { return u100_; }

private:
    double u001_;
    double u100_;
};

}  // namespace real_schmidt
