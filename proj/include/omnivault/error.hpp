#pragma once

#include <stdexcept>
#include <string>

namespace omnivault {

enum class ErrorCode {
    // crypto / formats
    AuthFailure,
    MalformedBlob,
    UnwrapFailure,
    CryptoFailure,
    BadLength,
    InvalidKey,
    // hierarchy
    WrongKeyType,
    PathMismatch,
    BodyDigestMismatch,
    MissingEnvelope,
    InvalidPath,
    // domain
    RecordNotFound,
    MacMismatch,
    DuplicateDeviceId,
    DomainExists,
    NoViableChannel,
    // storage
    NotFound,
    TimedOut,
    MalformedMessage,
    InvalidLink,
    // oob
    CapacityExceeded,
    PipeFailure,
    // auth_single
    DigestMismatch,
    // auth_pake
    DegenerateAlpha,
    DegenerateBeta,
    M1Mismatch,
    M2Mismatch,
    // sharing
    BodyMismatch,
};

inline const char* error_name(ErrorCode c) {
    switch (c) {
    case ErrorCode::AuthFailure:        return "AuthFailure";
    case ErrorCode::MalformedBlob:      return "MalformedBlob";
    case ErrorCode::UnwrapFailure:      return "UnwrapFailure";
    case ErrorCode::CryptoFailure:      return "CryptoFailure";
    case ErrorCode::BadLength:          return "BadLength";
    case ErrorCode::InvalidKey:         return "InvalidKey";
    case ErrorCode::WrongKeyType:       return "WrongKeyType";
    case ErrorCode::PathMismatch:       return "PathMismatch";
    case ErrorCode::BodyDigestMismatch: return "BodyDigestMismatch";
    case ErrorCode::MissingEnvelope:    return "MissingEnvelope";
    case ErrorCode::InvalidPath:        return "InvalidPath";
    case ErrorCode::RecordNotFound:     return "RecordNotFound";
    case ErrorCode::MacMismatch:        return "MacMismatch";
    case ErrorCode::DuplicateDeviceId:  return "DuplicateDeviceId";
    case ErrorCode::DomainExists:       return "DomainExists";
    case ErrorCode::NoViableChannel:    return "NoViableChannel";
    case ErrorCode::NotFound:           return "NotFound";
    case ErrorCode::TimedOut:           return "TimedOut";
    case ErrorCode::MalformedMessage:   return "MalformedMessage";
    case ErrorCode::InvalidLink:        return "InvalidLink";
    case ErrorCode::CapacityExceeded:   return "CapacityExceeded";
    case ErrorCode::PipeFailure:        return "PipeFailure";
    case ErrorCode::DigestMismatch:     return "DigestMismatch";
    case ErrorCode::DegenerateAlpha:    return "DegenerateAlpha";
    case ErrorCode::DegenerateBeta:     return "DegenerateBeta";
    case ErrorCode::M1Mismatch:         return "M1Mismatch";
    case ErrorCode::M2Mismatch:         return "M2Mismatch";
    case ErrorCode::BodyMismatch:       return "BodyMismatch";
    }
    return "Unknown";
}

// Single exception type; code() drives programmatic handling, aux() carries
// small context like the depth of a missing envelope.
class Error : public std::runtime_error {
public:
    explicit Error(ErrorCode code, std::string detail = {}, int aux = -1)
        : std::runtime_error(detail.empty()
                                 ? std::string(error_name(code))
                                 : std::string(error_name(code)) + ": " + detail),
          code_(code), aux_(aux) {}

    ErrorCode code() const noexcept { return code_; }
    int aux() const noexcept { return aux_; }

private:
    ErrorCode code_;
    int aux_;
};

[[noreturn]] inline void fail(ErrorCode code, std::string detail = {}, int aux = -1) {
    throw Error(code, std::move(detail), aux);
}

} // namespace omnivault
