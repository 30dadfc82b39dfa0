#include "pdetect/error.hpp"

namespace pdetect {

const char* to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::MissingFile: return "MissingFile";
        case ErrorKind::HeaderMismatch: return "HeaderMismatch";
        case ErrorKind::LabelMissing: return "LabelMissing";
        case ErrorKind::IoFailure: return "IoFailure";
        case ErrorKind::InvalidConfig: return "InvalidConfig";
        case ErrorKind::InvalidCutoff: return "InvalidCutoff";
        case ErrorKind::NotDivisible: return "NotDivisible";
        case ErrorKind::LengthMismatch: return "LengthMismatch";
        case ErrorKind::UnlabeledSet: return "UnlabeledSet";
        case ErrorKind::TooFewPoints: return "TooFewPoints";
        case ErrorKind::DimensionMismatch: return "DimensionMismatch";
        case ErrorKind::SingleCluster: return "SingleCluster";
        case ErrorKind::ShapeMismatch: return "ShapeMismatch";
        case ErrorKind::WeightNonPositive: return "WeightNonPositive";
        case ErrorKind::DegenerateLabels: return "DegenerateLabels";
        case ErrorKind::EmptySet: return "EmptySet";
        case ErrorKind::SingleClass: return "SingleClass";
    }
    return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

}  // namespace pdetect
