#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace slideq {

enum class ErrorCode {
  // imaging
  MalformedImage,
  UnsupportedFormat,
  // embeddings
  ModelLoadError,
  EmbeddingLookupMiss,
  InvalidEmbedding,
  // shared
  DimensionMismatch,
  ParseError,
  InvalidArgument,
  IoError,
  // fitting
  InsufficientData,
  DegenerateInput,
  EmptyDeck,
  // statistics
  ConstantInput,
  DegenerateR,
  TooFewPoints,
  ZeroTotalVariance,
  DegenerateAnova,
  AllTied,
  LengthMismatch,
  LabelMismatch,
  // corpus / persistence
  EmptyCorpus,
  UnreadableDirectory,
  ModelVersionMismatch,
  ChecksumMismatch,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Single exception type for the library; `code()` tells callers what failed.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::MalformedImage: return "MalformedImage";
    case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::ModelLoadError: return "ModelLoadError";
    case ErrorCode::EmbeddingLookupMiss: return "EmbeddingLookupMiss";
    case ErrorCode::InvalidEmbedding: return "InvalidEmbedding";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::DegenerateInput: return "DegenerateInput";
    case ErrorCode::EmptyDeck: return "EmptyDeck";
    case ErrorCode::ConstantInput: return "ConstantInput";
    case ErrorCode::DegenerateR: return "DegenerateR";
    case ErrorCode::TooFewPoints: return "TooFewPoints";
    case ErrorCode::ZeroTotalVariance: return "ZeroTotalVariance";
    case ErrorCode::DegenerateAnova: return "DegenerateAnova";
    case ErrorCode::AllTied: return "AllTied";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::LabelMismatch: return "LabelMismatch";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::UnreadableDirectory: return "UnreadableDirectory";
    case ErrorCode::ModelVersionMismatch: return "ModelVersionMismatch";
    case ErrorCode::ChecksumMismatch: return "ChecksumMismatch";
  }
  return "Unknown";
}

}  // namespace slideq
