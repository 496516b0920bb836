#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace compass {

enum class ErrorCode {
    EmptyInput,
    ParseError,
    DuplicateId,
    InvalidPolicy,
    IndexOutOfRange,
    DuplicateIndex,
    TooManyVariants,
    MarkerCollision,
    TooManyCompletions,
    InvalidArgument,
    BackendUnavailable,
    InputTooLong,
    SpecMiss,
    ReconciliationFailure,
    AllCandidatesMalformed,
    DivergenceDetected,
    EmptyCorpus,
    AdapterUnavailable,
    ScorerUnavailable,
    PoolExhausted,
    IoError,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

// Raised by corpus and record loaders; carries the 1-based source line.
class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& message)
        : Error(ErrorCode::ParseError, "line " + std::to_string(line) + ": " + message), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

// Non-fatal findings reported alongside a best-effort result.
struct Diagnostic {
    std::string kind;
    std::string message;

    bool operator==(const Diagnostic&) const = default;
};

using Diagnostics = std::vector<Diagnostic>;

inline bool has_diagnostic(const Diagnostics& diags, std::string_view kind) {
    for (const auto& d : diags) {
        if (d.kind == kind) return true;
    }
    return false;
}

}  // namespace compass
