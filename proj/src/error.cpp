#include "kpst/error.hpp"

namespace kpst {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::NonSquare: return "NonSquare";
        case ErrorCode::NotSymmetric: return "NotSymmetric";
        case ErrorCode::ShapeMismatch: return "ShapeMismatch";
        case ErrorCode::ConvergenceFailure: return "ConvergenceFailure";
        case ErrorCode::RankExceedsDimension: return "RankExceedsDimension";
        case ErrorCode::ZeroVector: return "ZeroVector";
        case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
        case ErrorCode::DimensionError: return "DimensionError";
        case ErrorCode::SingularSecondMoment: return "SingularSecondMoment";
        case ErrorCode::TooFewClusters: return "TooFewClusters";
        case ErrorCode::DegenerateSample: return "DegenerateSample";
        case ErrorCode::BlockSingular: return "BlockSingular";
        case ErrorCode::SigmaOutOfRange: return "SigmaOutOfRange";
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::SchemaError: return "SchemaError";
        case ErrorCode::EmptyAfterFiltering: return "EmptyAfterFiltering";
        case ErrorCode::RankDeficientDesign: return "RankDeficientDesign";
    }
    return "Unknown";
}

}  // namespace kpst
