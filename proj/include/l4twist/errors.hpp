#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace l4twist {

/// Failure categories shared by every module. The CLI and the sweep driver
/// report these names verbatim.
enum class ErrorCode {
    InvalidParameter,
    HyperbolicEquilibrium,
    NonFiniteValue,
    BranchPoint,
    StepFailure,
    DriftExceeded,
    MaxStepsExceeded,
    NotOnSection,
    ForbiddenRegion,
    NewtonDiverged,
    HyperbolicFixedPoint,
    CurveNotEncircling,
    InsufficientIterates,
    DefectiveSpectrum,
    ResonanceTooClose,
    DegenerateFrequency,
    NoPositiveRoot,
    NoSignChange,
    NoTwistlessCurve,
    NoSolution,
};

constexpr std::string_view to_string(ErrorCode code) noexcept
{
    switch (code) {
    case ErrorCode::InvalidParameter: return "InvalidParameter";
    case ErrorCode::HyperbolicEquilibrium: return "HyperbolicEquilibrium";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::BranchPoint: return "BranchPoint";
    case ErrorCode::StepFailure: return "StepFailure";
    case ErrorCode::DriftExceeded: return "DriftExceeded";
    case ErrorCode::MaxStepsExceeded: return "MaxStepsExceeded";
    case ErrorCode::NotOnSection: return "NotOnSection";
    case ErrorCode::ForbiddenRegion: return "ForbiddenRegion";
    case ErrorCode::NewtonDiverged: return "NewtonDiverged";
    case ErrorCode::HyperbolicFixedPoint: return "HyperbolicFixedPoint";
    case ErrorCode::CurveNotEncircling: return "CurveNotEncircling";
    case ErrorCode::InsufficientIterates: return "InsufficientIterates";
    case ErrorCode::DefectiveSpectrum: return "DefectiveSpectrum";
    case ErrorCode::ResonanceTooClose: return "ResonanceTooClose";
    case ErrorCode::DegenerateFrequency: return "DegenerateFrequency";
    case ErrorCode::NoPositiveRoot: return "NoPositiveRoot";
    case ErrorCode::NoSignChange: return "NoSignChange";
    case ErrorCode::NoTwistlessCurve: return "NoTwistlessCurve";
    case ErrorCode::NoSolution: return "NoSolution";
    }
    return "Unknown";
}

/// Validation failures (bad input) versus computational failures; the CLI maps
/// them to different exit statuses.
constexpr bool is_validation_error(ErrorCode code) noexcept
{
    return code == ErrorCode::InvalidParameter;
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code)
    {
    }

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what)
{
    throw Error(code, what);
}

inline void require(bool condition, ErrorCode code, const std::string& what)
{
    if (!condition) fail(code, what);
}

} // namespace l4twist
