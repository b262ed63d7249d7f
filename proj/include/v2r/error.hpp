#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace v2r {

enum class ErrorCode {
    InvalidArgument,
    FileNotFound,
    MalformedRecord,
    RaggedLength,
    ZeroDimension,
    MissingFrameSize,
    UndefinedDirection,
    NoPeriod,
    TooShort,
    KeyMismatch,
    Lexical,
    Syntax,
    Arity,
    UnknownVariable,
    DuplicateBinding,
    Shadowing,
    GuardedDivision,
    NonFinite,
    Precondition,
    NoCodeBlock,
    Transport,
    MalformedEnvelope,
    RoundFailure,
    UndefinedDenominator,
    Config,
    Io,
};

std::string_view to_string(ErrorCode code) noexcept;

// Every failure raised by the library carries a machine-checkable code.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace v2r
