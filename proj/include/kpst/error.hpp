#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace kpst {

enum class ErrorCode {
    InvalidArgument,
    NonSquare,
    NotSymmetric,
    ShapeMismatch,
    ConvergenceFailure,
    RankExceedsDimension,
    ZeroVector,
    NotPositiveDefinite,
    DimensionError,
    SingularSecondMoment,
    TooFewClusters,
    DegenerateSample,
    BlockSingular,
    SigmaOutOfRange,
    ParseError,
    SchemaError,
    EmptyAfterFiltering,
    RankDeficientDesign,
};

std::string_view to_string(ErrorCode code) noexcept;

// Every failure raised by the library carries one of the codes above so
// front ends can map them to exit statuses without parsing messages.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace kpst
