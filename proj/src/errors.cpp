#include "compass/errors.hpp"

namespace compass {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::EmptyInput: return "EmptyInput";
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::DuplicateId: return "DuplicateId";
        case ErrorCode::InvalidPolicy: return "InvalidPolicy";
        case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
        case ErrorCode::DuplicateIndex: return "DuplicateIndex";
        case ErrorCode::TooManyVariants: return "TooManyVariants";
        case ErrorCode::MarkerCollision: return "MarkerCollision";
        case ErrorCode::TooManyCompletions: return "TooManyCompletions";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::BackendUnavailable: return "BackendUnavailable";
        case ErrorCode::InputTooLong: return "InputTooLong";
        case ErrorCode::SpecMiss: return "SpecMiss";
        case ErrorCode::ReconciliationFailure: return "ReconciliationFailure";
        case ErrorCode::AllCandidatesMalformed: return "AllCandidatesMalformed";
        case ErrorCode::DivergenceDetected: return "DivergenceDetected";
        case ErrorCode::EmptyCorpus: return "EmptyCorpus";
        case ErrorCode::AdapterUnavailable: return "AdapterUnavailable";
        case ErrorCode::ScorerUnavailable: return "ScorerUnavailable";
        case ErrorCode::PoolExhausted: return "PoolExhausted";
        case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

}  // namespace compass
