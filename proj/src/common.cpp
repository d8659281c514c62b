#include "gts/common.hpp"

#include <algorithm>

namespace gts {

std::string_view to_string(DType dtype) {
  return dtype == DType::f32 ? "f32" : "f64";
}

std::size_t size_of(DType dtype) { return dtype == DType::f32 ? 4 : 8; }

std::string_view to_string(ErrorCode code) {
  switch (code) {
  case ErrorCode::SyntaxError: return "SyntaxError";
  case ErrorCode::IndentationError: return "IndentationError";
  case ErrorCode::UnknownKeyword: return "UnknownKeyword";
  case ErrorCode::RecursionError: return "RecursionError";
  case ErrorCode::ArityError: return "ArityError";
  case ErrorCode::UnknownFunction: return "UnknownFunction";
  case ErrorCode::UnboundExternal: return "UnboundExternal";
  case ErrorCode::TypeError: return "TypeError";
  case ErrorCode::UnknownName: return "UnknownName";
  case ErrorCode::DuplicateName: return "DuplicateName";
  case ErrorCode::InvalidArgument: return "InvalidArgument";
  case ErrorCode::UnknownStencil: return "UnknownStencil";
  case ErrorCode::SelfAssignParallel: return "SelfAssignParallel";
  case ErrorCode::SelfOffsetRead: return "SelfOffsetRead";
  case ErrorCode::VerticalOrderViolation: return "VerticalOrderViolation";
  case ErrorCode::ParallelVerticalDependence: return "ParallelVerticalDependence";
  case ErrorCode::TargetOffset: return "TargetOffset";
  case ErrorCode::ScalarAssignment: return "ScalarAssignment";
  case ErrorCode::IfBlockOffsetRead: return "IfBlockOffsetRead";
  case ErrorCode::OverlappingIntervals: return "OverlappingIntervals";
  case ErrorCode::IntervalOrderMismatch: return "IntervalOrderMismatch";
  case ErrorCode::EmptyInterval: return "EmptyInterval";
  case ErrorCode::UseBeforeDefine: return "UseBeforeDefine";
  case ErrorCode::UnusedTemporary: return "UnusedTemporary";
  case ErrorCode::AllocationError: return "AllocationError";
  case ErrorCode::InvalidLayout: return "InvalidLayout";
  case ErrorCode::FormatError: return "FormatError";
  case ErrorCode::TruncatedFile: return "TruncatedFile";
  case ErrorCode::IoError: return "IoError";
  case ErrorCode::UnknownBackend: return "UnknownBackend";
  case ErrorCode::ToolchainMissing: return "ToolchainMissing";
  case ErrorCode::CompileFailed: return "CompileFailed";
  case ErrorCode::SymbolNotFound: return "SymbolNotFound";
  case ErrorCode::CacheCorrupt: return "CacheCorrupt";
  case ErrorCode::DomainTooSmall: return "DomainTooSmall";
  case ErrorCode::KBelowMinimum: return "KBelowMinimum";
  case ErrorCode::OutOfBounds: return "OutOfBounds";
  case ErrorCode::LayoutMismatch: return "LayoutMismatch";
  case ErrorCode::DTypeMismatch: return "DTypeMismatch";
  case ErrorCode::MissingArgument: return "MissingArgument";
  case ErrorCode::UnexpectedArgument: return "UnexpectedArgument";
  case ErrorCode::AliasedFields: return "AliasedFields";
  }
  return "Unknown";
}

std::string render(const Diagnostic &diagnostic, std::string_view file) {
  std::string out(file.empty() ? std::string_view("<input>") : file);
  out += ':' + std::to_string(diagnostic.span.line) + ':' +
         std::to_string(diagnostic.span.column) + ": ";
  out += diagnostic.severity == Severity::error ? "error[" : "warning[";
  out += to_string(diagnostic.code);
  out += "]: ";
  out += diagnostic.message;
  return out;
}

bool has_errors(const std::vector<Diagnostic> &diagnostics) {
  return std::any_of(diagnostics.begin(), diagnostics.end(),
                     [](const Diagnostic &d) { return d.severity == Severity::error; });
}

Error::Error(ErrorCode code, const std::string &message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message),
      code_(code) {}

namespace {

ErrorCode first_error_code(const std::vector<Diagnostic> &diagnostics) {
  for (const auto &d : diagnostics)
    if (d.severity == Severity::error)
      return d.code;
  return diagnostics.empty() ? ErrorCode::SyntaxError : diagnostics.front().code;
}

std::string first_message(const std::vector<Diagnostic> &diagnostics,
                          const std::string &file) {
  for (const auto &d : diagnostics)
    if (d.severity == Severity::error)
      return render(d, file);
  return "compilation failed";
}

} // namespace

CompileError::CompileError(std::vector<Diagnostic> diagnostics, std::string file)
    : Error(first_error_code(diagnostics), first_message(diagnostics, file)),
      diagnostics_(std::move(diagnostics)), file_(std::move(file)) {}

std::string CompileError::rendered() const {
  std::string out;
  for (const auto &d : diagnostics_) {
    out += render(d, file_);
    out += '\n';
  }
  return out;
}

void throw_diagnostic(ErrorCode code, SourceSpan span, std::string message) {
  throw CompileError({Diagnostic{Severity::error, code, span, std::move(message)}});
}

} // namespace gts
