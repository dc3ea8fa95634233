#include "cornyield/error.hpp"

namespace cornyield {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::MalformedCsv: return "MalformedCsv";
        case ErrorCode::TypeError: return "TypeError";
        case ErrorCode::EmptyDataset: return "EmptyDataset";
        case ErrorCode::SchemaMismatch: return "SchemaMismatch";
        case ErrorCode::DivisionByZero: return "DivisionByZero";
        case ErrorCode::UnknownCategory: return "UnknownCategory";
        case ErrorCode::CountMismatch: return "CountMismatch";
        case ErrorCode::SeriesTooShort: return "SeriesTooShort";
        case ErrorCode::NonConvergence: return "NonConvergence";
        case ErrorCode::LengthMismatch: return "LengthMismatch";
        case ErrorCode::DegenerateInput: return "DegenerateInput";
        case ErrorCode::EmptyInput: return "EmptyInput";
        case ErrorCode::EmptySelection: return "EmptySelection";
        case ErrorCode::ShapeMismatch: return "ShapeMismatch";
        case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
        case ErrorCode::TooFewRows: return "TooFewRows";
        case ErrorCode::DegenerateResample: return "DegenerateResample";
        case ErrorCode::MissingField: return "MissingField";
        case ErrorCode::UnknownField: return "UnknownField";
        case ErrorCode::UnknownState: return "UnknownState";
        case ErrorCode::NonFiniteValue: return "NonFiniteValue";
        case ErrorCode::VersionMismatch: return "VersionMismatch";
        case ErrorCode::CorruptFile: return "CorruptFile";
        case ErrorCode::ConfigError: return "ConfigError";
        case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

}  // namespace cornyield
