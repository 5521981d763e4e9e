#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace nrp {

enum class ErrorCode {
    UnknownCategory,
    DuplicateKey,
    RecordAfterDropout,
    NonContiguousWaves,
    WaveOutOfRange,
    UnknownPanelist,
    InconsistentRecord,
    SchemaInvalid,
    EmptyGroups,
    TooFewWaves,
    EmptyGrid,
    NoVariation,
    NonFiniteInput,
    SchemaMismatch,
    SingleClass,
    EmptyInput,
    InsufficientSplits,
    MissingEvaluation,
    InvalidConfig,
    ConfigInvalid,
    IoError,
    ParseError,
};

/// Upper-snake name of an error code, as printed in structured CLI errors.
std::string_view error_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

} // namespace nrp
