#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace gts {

/// Signed (i, j, k) triple used for shapes, origins, strides and domains.
using Index3 = std::array<long, 3>;

/// Relative access offset in (i, j, k).
using Offset3 = std::array<int, 3>;

enum class DType : std::uint8_t { f32 = 1, f64 = 2 };

std::string_view to_string(DType dtype);
std::size_t size_of(DType dtype);

enum class ErrorCode {
  // frontend
  SyntaxError,
  IndentationError,
  UnknownKeyword,
  RecursionError,
  ArityError,
  UnknownFunction,
  UnboundExternal,
  TypeError,
  UnknownName,
  DuplicateName,
  InvalidArgument,
  UnknownStencil,
  // analysis
  SelfAssignParallel,
  SelfOffsetRead,
  VerticalOrderViolation,
  ParallelVerticalDependence,
  TargetOffset,
  ScalarAssignment,
  IfBlockOffsetRead,
  OverlappingIntervals,
  IntervalOrderMismatch,
  EmptyInterval,
  UseBeforeDefine,
  UnusedTemporary,
  // storage
  AllocationError,
  InvalidLayout,
  FormatError,
  TruncatedFile,
  IoError,
  // backends
  UnknownBackend,
  ToolchainMissing,
  CompileFailed,
  SymbolNotFound,
  CacheCorrupt,
  // runtime
  DomainTooSmall,
  KBelowMinimum,
  OutOfBounds,
  LayoutMismatch,
  DTypeMismatch,
  MissingArgument,
  UnexpectedArgument,
  AliasedFields,
};

std::string_view to_string(ErrorCode code);

/// 1-based position in the source text. Line 0 means "no position".
struct SourceSpan {
  int line = 0;
  int column = 0;

  friend bool operator==(const SourceSpan &, const SourceSpan &) = default;
};

enum class Severity { error, warning };

struct Diagnostic {
  Severity severity = Severity::error;
  ErrorCode code = ErrorCode::SyntaxError;
  SourceSpan span;
  std::string message;
};

/// Renders `file:line:col: error[CODE]: message`.
std::string render(const Diagnostic &diagnostic, std::string_view file);

bool has_errors(const std::vector<Diagnostic> &diagnostics);

class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string &message);

  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

/// Thrown by the compilation pipeline; carries every diagnostic collected so
/// far. code() is the code of the first error.
class CompileError : public Error {
public:
  CompileError(std::vector<Diagnostic> diagnostics, std::string file = {});

  const std::vector<Diagnostic> &diagnostics() const noexcept {
    return diagnostics_;
  }
  const std::string &file() const noexcept { return file_; }

  /// All diagnostics rendered one per line.
  std::string rendered() const;

private:
  std::vector<Diagnostic> diagnostics_;
  std::string file_;
};

[[noreturn]] void throw_diagnostic(ErrorCode code, SourceSpan span,
                                   std::string message);

} // namespace gts
