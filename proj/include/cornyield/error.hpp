#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cornyield {

enum class ErrorCode {
    InvalidArgument,
    MalformedCsv,
    TypeError,
    EmptyDataset,
    SchemaMismatch,
    DivisionByZero,
    UnknownCategory,
    CountMismatch,
    SeriesTooShort,
    NonConvergence,
    LengthMismatch,
    DegenerateInput,
    EmptyInput,
    EmptySelection,
    ShapeMismatch,
    NonFiniteLoss,
    TooFewRows,
    DegenerateResample,
    MissingField,
    UnknownField,
    UnknownState,
    NonFiniteValue,
    VersionMismatch,
    CorruptFile,
    ConfigError,
    IoError,
};

[[nodiscard]] std::string_view to_string(ErrorCode code) noexcept;

/// Every failure raised by the toolkit carries a machine-readable code.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

}  // namespace cornyield
