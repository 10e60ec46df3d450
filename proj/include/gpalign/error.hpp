#pragma once

#include <stdexcept>
#include <string>

namespace gpalign {

// Numeric values are mirrored by gpa_status in gpalign.h.
enum class ErrorCode : int {
    Ok = 0,
    InvalidArgument = 1,
    EmptySet = 2,
    DegenerateSet = 3,
    LengthMismatch = 4,
    DimMismatch = 5,
    ZeroDim = 6,
    SingularTpsSystem = 7,
    LevelOutOfRange = 8,
    TooFewSets = 9,
    EmptyIndex = 10,
    ShapeMismatch = 11,
    NonFiniteGradient = 12,
    NonFiniteLoss = 13,
    MissingForwardCache = 14,
    ParseError = 15,
    MixedDimensionality = 16,
    EmptyFile = 17,
    IoError = 18,
    NotTwoDimensional = 19,
    Internal = 20,
};

const char* to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what)
{
    throw Error(code, what);
}

} // namespace gpalign
