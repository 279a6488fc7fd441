#pragma once

#include <stdexcept>
#include <string>

namespace semloop {

enum class ErrorCode {
  EmptyVocabulary,
  ParseError,
  UnknownFormat,
  EmptyCorpus,
  DegenerateVocabulary,
  InvalidMixture,
  SingleClassTrainSet,
  DimensionMismatch,
  EmptyDocument,
  NoActiveTopics,
  KindMismatch,
  InvalidLambda,
  DegenerateMixture,
  EmptyPool,
  LengthMismatch,
  AllLocalGsEmpty,
  ClassTooSmall,
  InvalidConfig,
  InvalidArgument,
  UnknownSession,
  WrongPhase,
  SchemaError,
  Conflict,
  Io,
};

const char* to_string(ErrorCode code) noexcept;

/// All library failures surface as this exception; `code()` identifies the
/// contract-level error kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace semloop
