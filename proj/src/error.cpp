#include "tilevae/error.hpp"

namespace tilevae {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::RaggedRows: return "RaggedRows";
    case ErrorCode::UnknownChar: return "UnknownChar";
    case ErrorCode::HeightPolicyViolation: return "HeightPolicyViolation";
    case ErrorCode::TooSmall: return "TooSmall";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::BadShape: return "BadShape";
    case ErrorCode::NotNormalized: return "NotNormalized";
    case ErrorCode::BadConfig: return "BadConfig";
    case ErrorCode::BadDims: return "BadDims";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::NoSequentialPairs: return "NoSequentialPairs";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::AlphabetMismatch: return "AlphabetMismatch";
    case ErrorCode::CorruptFile: return "CorruptFile";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::UnknownGame: return "UnknownGame";
    case ErrorCode::MissingAttribute: return "MissingAttribute";
    case ErrorCode::BadWeights: return "BadWeights";
    case ErrorCode::MissingReference: return "MissingReference";
    case ErrorCode::MissingModel: return "MissingModel";
    case ErrorCode::BadObjective: return "BadObjective";
    case ErrorCode::DegenerateSearch: return "DegenerateSearch";
    case ErrorCode::BadSchedule: return "BadSchedule";
    case ErrorCode::TooFewPoints: return "TooFewPoints";
    case ErrorCode::DegenerateInput: return "DegenerateInput";
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::JobConflict: return "JobConflict";
    case ErrorCode::UnknownCorpus: return "UnknownCorpus";
    case ErrorCode::PortInUse: return "PortInUse";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace tilevae
