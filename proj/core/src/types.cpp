#include "prime/types.hpp"

namespace prime {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedRecord: return "MalformedRecord";
    case ErrorCode::EmptyStructure: return "EmptyStructure";
    case ErrorCode::MalformedHeader: return "MalformedHeader";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::TooFewPoints: return "TooFewPoints";
    case ErrorCode::NoAtoms: return "NoAtoms";
    case ErrorCode::MissingBackbone: return "MissingBackbone";
    case ErrorCode::BadSegmentation: return "BadSegmentation";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NegativeWeight: return "NegativeWeight";
    case ErrorCode::MissingEmbedding: return "MissingEmbedding";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::Divergence: return "Divergence";
    case ErrorCode::NonScalarLoss: return "NonScalarLoss";
    case ErrorCode::MissingGrad: return "MissingGrad";
    case ErrorCode::LabelOutOfRange: return "LabelOutOfRange";
    case ErrorCode::EmptyLevel: return "EmptyLevel";
    case ErrorCode::NoPositives: return "NoPositives";
    case ErrorCode::OneClassOnly: return "OneClassOnly";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::FormatError: return "FormatError";
  }
  return "Unknown";
}

}  // namespace prime
