#pragma once

#include "gts/ir.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gts {

/// Stencil source text (`.gts`). `path` is used only in diagnostics.
struct SourceProgram {
  std::string text;
  std::string path;

  static SourceProgram from_file(const std::string &path);
};

enum class TokenKind {
  name,
  number,
  op, ///< punctuation and operators
  newline,
  indent,
  dedent,
  end_of_file,
};

struct Token {
  TokenKind kind = TokenKind::end_of_file;
  std::string text;
  SourceSpan span;
};

/// Splits source text into tokens with synthetic INDENT/DEDENT tokens.
/// Comments, blank lines and line breaks inside brackets are dropped.
std::vector<Token> tokenize(const SourceProgram &src);

/// Parses every top-level `function` and `stencil`. Field reads always carry
/// an explicit offset; a bare field name is read at [0,0,0].
ParsedProgram parse_program(const SourceProgram &src);

/// Substitutes every user function call inside `stencil`. Function locals
/// become fresh temporaries named `<function>__<local>__<n>`.
StencilDefinition inline_functions(const StencilDefinition &stencil,
                                   std::span<const FunctionDef> functions);

/// Replaces every remaining free identifier by its bound literal and records
/// the bindings actually referenced on the definition.
StencilDefinition bind_externals(const StencilDefinition &stencil,
                                 const ExternalsBinding &externals);

/// Parses `NAME=VALUE` (VALUE an integer or floating literal) into `binding`.
/// Throws TypeError for non-numeric values.
void parse_external_assignment(std::string_view text, ExternalsBinding &binding);

/// parse_program, then inline and bind the named stencil. Errors are reported
/// against `src.path`.
StencilDefinition load_stencil(const SourceProgram &src, std::string_view stencil_name,
                               const ExternalsBinding &externals);

} // namespace gts
