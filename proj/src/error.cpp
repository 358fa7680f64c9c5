#include "wcet/error.hpp"

namespace wcet {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnknownMnemonic: return "UnknownMnemonic";
    case ErrorCode::UnresolvedLabel: return "UnresolvedLabel";
    case ErrorCode::EmptyProgram: return "EmptyProgram";
    case ErrorCode::MalformedLine: return "MalformedLine";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::NonPositiveLabel: return "NonPositiveLabel";
    case ErrorCode::DuplicateName: return "DuplicateName";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::BadFoldCount: return "BadFoldCount";
    case ErrorCode::BadShape: return "BadShape";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::StaleCache: return "StaleCache";
    case ErrorCode::MissingNormStats: return "MissingNormStats";
    case ErrorCode::CorruptModel: return "CorruptModel";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::EmptyReports: return "EmptyReports";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NumericFailure: return "NumericFailure";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& detail)
    : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code), detail_(detail) {}

namespace {

std::string locate(int line, const std::string& detail, const std::string& path) {
  std::string where = path;
  if (line > 0) where += (where.empty() ? "line " : ":") + std::to_string(line);
  return where.empty() ? detail : where + ": " + detail;
}

}  // namespace

ParseError::ParseError(ErrorCode code, int line, const std::string& detail, const std::string& path)
    : Error(code, locate(line, detail, path)), line_(line), source_detail_(detail), path_(path) {}

NumericError::NumericError(std::size_t epoch, const std::string& message)
    : Error(ErrorCode::NumericFailure, "epoch " + std::to_string(epoch) + ": " + message),
      epoch_(epoch) {}

}  // namespace wcet
