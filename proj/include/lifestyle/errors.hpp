#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace lifestyle {

enum class ErrorCode {
    DimensionMismatch,
    NotPositiveDefinite,
    NoExcessReturn,
    InvalidSchedule,
    TimeOutOfRange,
    InfeasibleAlpha,
    InvalidArgument,
    InvariantViolated,
    NonConvergence,
    CharacteristicExitsDomain,
    IncompatibleGrid,
    InsufficientPoints,
    OutOfDomain,
    WealthBelowPV,
    NegativeBankAfterInverse,
    DiffusionDegenerate,
    SignMismatch,
    BracketFailure,
    NegativeWealth,
    AllCellsFailed,
    ConfigError,
    CacheError,
};

std::string_view to_string(ErrorCode code);

/// Every library failure is reported as an Error carrying a stable code.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// Non-fatal diagnostics (clamped queries, extrapolated characteristics).
/// The default sink writes to stderr; pass an empty function to silence.
using WarningSink = std::function<void(std::string_view)>;
void set_warning_sink(WarningSink sink);
void warn(std::string_view message);

}  // namespace lifestyle
