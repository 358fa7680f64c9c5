#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace wcet {

enum class ErrorCode {
  // vmir
  UnknownMnemonic,
  UnresolvedLabel,
  EmptyProgram,
  MalformedLine,
  // io / dataset
  IoFailure,
  SchemaMismatch,
  NonPositiveLabel,
  DuplicateName,
  EmptyDataset,
  BadFoldCount,
  // neuralnet
  BadShape,
  ShapeMismatch,
  LengthMismatch,
  StaleCache,
  MissingNormStats,
  CorruptModel,
  // experiment
  EmptyInput,
  EmptyReports,
  // generic
  InvalidArgument,
  NumericFailure,
};

std::string_view to_string(ErrorCode code);

/// Single exception type for the toolkit. The code classifies the failure;
/// the message carries the offending construct (line, column, path, ...).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail);

  ErrorCode code() const noexcept { return code_; }
  /// The message without the leading code name.
  const std::string& detail() const noexcept { return detail_; }

  /// Same code, with `context` (usually a path) prepended to the detail.
  Error in_context(const std::string& context) const { return Error(code_, context + ": " + detail_); }

 private:
  ErrorCode code_;
  std::string detail_;
};

/// Raised by the parser; remembers the 1-based source line (0 when the error
/// is not tied to a line, e.g. EmptyProgram) and, once known, the file.
class ParseError : public Error {
 public:
  ParseError(ErrorCode code, int line, const std::string& detail, const std::string& path = {});

  int line() const noexcept { return line_; }
  const std::string& source_detail() const noexcept { return source_detail_; }
  const std::string& path() const noexcept { return path_; }

  ParseError with_path(const std::string& path) const {
    return ParseError(code(), line_, source_detail_, path);
  }

 private:
  int line_;
  std::string source_detail_;
  std::string path_;
};

/// Training diverged. `epoch` is 1-based.
class NumericError : public Error {
 public:
  NumericError(std::size_t epoch, const std::string& message);

  std::size_t epoch() const noexcept { return epoch_; }

 private:
  std::size_t epoch_;
};

}  // namespace wcet
