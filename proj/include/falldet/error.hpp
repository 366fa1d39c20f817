#pragma once

#include <stdexcept>
#include <string>

namespace falldet {

enum class ErrorCode {
  EmptyRecording,
  InvalidRecording,
  SignalTooShort,
  NoSignalsEnabled,
  InvalidConfig,
  SingleClassDevSet,
  SingleClassTrainingSet,
  IncompleteFeatureVector,
  ModelNotFitted,
  ManifestRootMissing,
  UnknownActivityCode,
  ParseError,
  TooFewSubjects,
  Io,
};

inline const char *to_string(ErrorCode code) {
  switch (code) {
  case ErrorCode::EmptyRecording: return "EmptyRecording";
  case ErrorCode::InvalidRecording: return "InvalidRecording";
  case ErrorCode::SignalTooShort: return "SignalTooShort";
  case ErrorCode::NoSignalsEnabled: return "NoSignalsEnabled";
  case ErrorCode::InvalidConfig: return "InvalidConfig";
  case ErrorCode::SingleClassDevSet: return "SingleClassDevSet";
  case ErrorCode::SingleClassTrainingSet: return "SingleClassTrainingSet";
  case ErrorCode::IncompleteFeatureVector: return "IncompleteFeatureVector";
  case ErrorCode::ModelNotFitted: return "ModelNotFitted";
  case ErrorCode::ManifestRootMissing: return "ManifestRootMissing";
  case ErrorCode::UnknownActivityCode: return "UnknownActivityCode";
  case ErrorCode::ParseError: return "ParseError";
  case ErrorCode::TooFewSubjects: return "TooFewSubjects";
  case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

/// Every failure raised by the library carries a machine-checkable code.
class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string &message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

} // namespace falldet
