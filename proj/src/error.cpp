#include "nrp/error.hpp"

namespace nrp {

std::string_view error_name(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::UnknownCategory: return "UNKNOWN_CATEGORY";
    case ErrorCode::DuplicateKey: return "DUPLICATE_KEY";
    case ErrorCode::RecordAfterDropout: return "RECORD_AFTER_DROPOUT";
    case ErrorCode::NonContiguousWaves: return "NON_CONTIGUOUS_WAVES";
    case ErrorCode::WaveOutOfRange: return "WAVE_OUT_OF_RANGE";
    case ErrorCode::UnknownPanelist: return "UNKNOWN_PANELIST";
    case ErrorCode::InconsistentRecord: return "INCONSISTENT_RECORD";
    case ErrorCode::SchemaInvalid: return "SCHEMA_INVALID";
    case ErrorCode::EmptyGroups: return "EMPTY_GROUPS";
    case ErrorCode::TooFewWaves: return "TOO_FEW_WAVES";
    case ErrorCode::EmptyGrid: return "EMPTY_GRID";
    case ErrorCode::NoVariation: return "NO_VARIATION";
    case ErrorCode::NonFiniteInput: return "NON_FINITE_INPUT";
    case ErrorCode::SchemaMismatch: return "SCHEMA_MISMATCH";
    case ErrorCode::SingleClass: return "SINGLE_CLASS";
    case ErrorCode::EmptyInput: return "EMPTY_INPUT";
    case ErrorCode::InsufficientSplits: return "INSUFFICIENT_SPLITS";
    case ErrorCode::MissingEvaluation: return "MISSING_EVALUATION";
    case ErrorCode::InvalidConfig: return "INVALID_CONFIG";
    case ErrorCode::ConfigInvalid: return "CONFIG_INVALID";
    case ErrorCode::IoError: return "IO_ERROR";
    case ErrorCode::ParseError: return "PARSE_ERROR";
    }
    return "UNKNOWN";
}

} // namespace nrp
