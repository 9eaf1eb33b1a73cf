#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace qsdcert {

enum class ErrorCode {
    NotSquare,
    DimensionMismatch,
    NegativeEntry,
    RowSumExceedsOne,
    DeadRow,
    InvalidDistribution,
    NotIrreducible,
    NoConvergence,
    ZeroPiEntry,
    NotQsd,
    NotPrimitiveAtHorizon,
    HorizonNotFound,
    Extinct,
    NoContraction,
    ContractionViolated,
    CertificateMismatch,
    NonPositiveEigenfunction,
    IdentityViolated,
    InvalidSpec,
    StartOutsideDomain,
    StepTooCoarse,
    DegenerateSubset,
    HullInfeasible,
    AllAbsorbed,
    AdjointViolated,
    ParseError,
};

std::string_view to_string(ErrorCode code);

/// Library error. `indices` carries the offending row/entry/subset when the
/// failure is localized.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what, std::vector<std::size_t> indices = {})
        : std::runtime_error(std::string(to_string(code)) + ": " + what),
          code_(code), indices_(std::move(indices)) {}

    ErrorCode code() const noexcept { return code_; }
    const std::vector<std::size_t>& indices() const noexcept { return indices_; }

private:
    ErrorCode code_;
    std::vector<std::size_t> indices_;
};

}  // namespace qsdcert
