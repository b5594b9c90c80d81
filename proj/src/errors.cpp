#include "lifestyle/errors.hpp"

#include <iostream>
#include <mutex>

namespace lifestyle {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
        case ErrorCode::NoExcessReturn: return "NoExcessReturn";
        case ErrorCode::InvalidSchedule: return "InvalidSchedule";
        case ErrorCode::TimeOutOfRange: return "TimeOutOfRange";
        case ErrorCode::InfeasibleAlpha: return "InfeasibleAlpha";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::InvariantViolated: return "InvariantViolated";
        case ErrorCode::NonConvergence: return "NonConvergence";
        case ErrorCode::CharacteristicExitsDomain: return "CharacteristicExitsDomain";
        case ErrorCode::IncompatibleGrid: return "IncompatibleGrid";
        case ErrorCode::InsufficientPoints: return "InsufficientPoints";
        case ErrorCode::OutOfDomain: return "OutOfDomain";
        case ErrorCode::WealthBelowPV: return "WealthBelowPV";
        case ErrorCode::NegativeBankAfterInverse: return "NegativeBankAfterInverse";
        case ErrorCode::DiffusionDegenerate: return "DiffusionDegenerate";
        case ErrorCode::SignMismatch: return "SignMismatch";
        case ErrorCode::BracketFailure: return "BracketFailure";
        case ErrorCode::NegativeWealth: return "NegativeWealth";
        case ErrorCode::AllCellsFailed: return "AllCellsFailed";
        case ErrorCode::ConfigError: return "ConfigError";
        case ErrorCode::CacheError: return "CacheError";
    }
    return "Unknown";
}

namespace {

std::mutex& sink_mutex() {
    static std::mutex m;
    return m;
}

WarningSink& sink() {
    static WarningSink s = [](std::string_view msg) { std::cerr << "warning: " << msg << '\n'; };
    return s;
}

}  // namespace

void set_warning_sink(WarningSink s) {
    std::lock_guard<std::mutex> lock(sink_mutex());
    sink() = std::move(s);
}

void warn(std::string_view message) {
    std::lock_guard<std::mutex> lock(sink_mutex());
    if (sink()) sink()(message);
}

}  // namespace lifestyle
