#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tilevae {

enum class ErrorCode {
  // corpus
  RaggedRows,
  UnknownChar,
  HeightPolicyViolation,
  TooSmall,
  EmptyCorpus,
  BadShape,
  NotNormalized,
  BadConfig,
  // model
  BadDims,
  NonFinite,
  NoSequentialPairs,
  VersionMismatch,
  AlphabetMismatch,
  CorruptFile,
  // latent
  OutOfRange,
  UnknownGame,
  MissingAttribute,
  BadWeights,
  // metrics
  MissingReference,
  MissingModel,
  // search / assembly
  BadObjective,
  DegenerateSearch,
  BadSchedule,
  // viz
  TooFewPoints,
  DegenerateInput,
  // service
  NotFound,
  JobConflict,
  UnknownCorpus,
  PortInUse,
  Io,
};

std::string_view to_string(ErrorCode code);

/// Every failure surfaced by the library carries one of the codes above so
/// the CLI and the HTTP layer can map it without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace tilevae
