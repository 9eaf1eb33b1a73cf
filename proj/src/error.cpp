#include "qsdcert/error.hpp"

namespace qsdcert {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::NotSquare: return "NotSquare";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::NegativeEntry: return "NegativeEntry";
        case ErrorCode::RowSumExceedsOne: return "RowSumExceedsOne";
        case ErrorCode::DeadRow: return "DeadRow";
        case ErrorCode::InvalidDistribution: return "InvalidDistribution";
        case ErrorCode::NotIrreducible: return "NotIrreducible";
        case ErrorCode::NoConvergence: return "NoConvergence";
        case ErrorCode::ZeroPiEntry: return "ZeroPiEntry";
        case ErrorCode::NotQsd: return "NotQsd";
        case ErrorCode::NotPrimitiveAtHorizon: return "NotPrimitiveAtHorizon";
        case ErrorCode::HorizonNotFound: return "HorizonNotFound";
        case ErrorCode::Extinct: return "Extinct";
        case ErrorCode::NoContraction: return "NoContraction";
        case ErrorCode::ContractionViolated: return "ContractionViolated";
        case ErrorCode::CertificateMismatch: return "CertificateMismatch";
        case ErrorCode::NonPositiveEigenfunction: return "NonPositiveEigenfunction";
        case ErrorCode::IdentityViolated: return "IdentityViolated";
        case ErrorCode::InvalidSpec: return "InvalidSpec";
        case ErrorCode::StartOutsideDomain: return "StartOutsideDomain";
        case ErrorCode::StepTooCoarse: return "StepTooCoarse";
        case ErrorCode::DegenerateSubset: return "DegenerateSubset";
        case ErrorCode::HullInfeasible: return "HullInfeasible";
        case ErrorCode::AllAbsorbed: return "AllAbsorbed";
        case ErrorCode::AdjointViolated: return "AdjointViolated";
        case ErrorCode::ParseError: return "ParseError";
    }
    return "Unknown";
}

}  // namespace qsdcert
