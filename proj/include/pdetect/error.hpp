#pragma once

#include <stdexcept>
#include <string>

namespace pdetect {

enum class ErrorKind {
    MissingFile,
    HeaderMismatch,
    LabelMissing,
    IoFailure,
    InvalidConfig,
    InvalidCutoff,
    NotDivisible,
    LengthMismatch,
    UnlabeledSet,
    TooFewPoints,
    DimensionMismatch,
    SingleCluster,
    ShapeMismatch,
    WeightNonPositive,
    DegenerateLabels,
    EmptySet,
    SingleClass,
};

const char* to_string(ErrorKind kind) noexcept;

// All library failures surface as this exception; kind() carries the category.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message);

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace pdetect
