#include "v2r/error.hpp"

namespace v2r {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::InvalidArgument: return "invalid_argument";
        case ErrorCode::FileNotFound: return "file_not_found";
        case ErrorCode::MalformedRecord: return "malformed_record";
        case ErrorCode::RaggedLength: return "ragged_length";
        case ErrorCode::ZeroDimension: return "zero_dimension";
        case ErrorCode::MissingFrameSize: return "missing_frame_size";
        case ErrorCode::UndefinedDirection: return "undefined_direction";
        case ErrorCode::NoPeriod: return "no_period";
        case ErrorCode::TooShort: return "too_short";
        case ErrorCode::KeyMismatch: return "key_mismatch";
        case ErrorCode::Lexical: return "lexical_error";
        case ErrorCode::Syntax: return "syntax_error";
        case ErrorCode::Arity: return "arity_error";
        case ErrorCode::UnknownVariable: return "unknown_variable";
        case ErrorCode::DuplicateBinding: return "duplicate_binding";
        case ErrorCode::Shadowing: return "shadowing";
        case ErrorCode::GuardedDivision: return "guarded_division";
        case ErrorCode::NonFinite: return "non_finite";
        case ErrorCode::Precondition: return "precondition";
        case ErrorCode::NoCodeBlock: return "no_code_block";
        case ErrorCode::Transport: return "transport";
        case ErrorCode::MalformedEnvelope: return "malformed_envelope";
        case ErrorCode::RoundFailure: return "round_failure";
        case ErrorCode::UndefinedDenominator: return "undefined_denominator";
        case ErrorCode::Config: return "config";
        case ErrorCode::Io: return "io";
    }
    return "unknown";
}

}  // namespace v2r
