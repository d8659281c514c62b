#include "gts/frontend.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

namespace gts {

SourceProgram SourceProgram::from_file(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error(ErrorCode::IoError, "cannot open '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return {text.str(), path};
}

namespace {

bool is_name_start(char c) {
  return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
}

bool is_name_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

bool is_digit(char c) { return c >= '0' && c <= '9'; }

class Lexer {
public:
  explicit Lexer(const std::string &text) : text_(text) {}

  std::vector<Token> run() {
    std::vector<int> indents{0};
    std::size_t pos = 0;
    int line = 1;
    while (pos < text_.size()) {
      std::size_t eol = text_.find('\n', pos);
      if (eol == std::string::npos)
        eol = text_.size();
      lex_line(std::string_view(text_).substr(pos, eol - pos), line, indents);
      pos = eol + 1;
      ++line;
    }
    if (depth_ > 0)
      throw_diagnostic(ErrorCode::SyntaxError, open_bracket_,
                       "unclosed bracket at end of input");
    SourceSpan eof{line, 1};
    if (line_has_tokens_)
      push(TokenKind::newline, "", eof);
    while (indents.size() > 1) {
      indents.pop_back();
      push(TokenKind::dedent, "", eof);
    }
    push(TokenKind::end_of_file, "", eof);
    return std::move(tokens_);
  }

private:
  void push(TokenKind kind, std::string text, SourceSpan span) {
    tokens_.push_back(Token{kind, std::move(text), span});
  }

  void lex_line(std::string_view raw, int line, std::vector<int> &indents) {
    std::string_view content = raw;
    if (!content.empty() && content.back() == '\r')
      content.remove_suffix(1);

    std::size_t col = 0;
    if (depth_ == 0) {
      // Start of a logical line: measure indentation.
      int width = 0;
      bool saw_tab = false;
      while (col < content.size() && (content[col] == ' ' || content[col] == '\t')) {
        if (content[col] == '\t')
          saw_tab = true;
        ++width;
        ++col;
      }
      if (col == content.size() || content[col] == '#')
        return; // blank or comment-only line
      if (saw_tab)
        throw_diagnostic(ErrorCode::IndentationError, {line, 1},
                         "tab character in indentation; use spaces");
      SourceSpan span{line, static_cast<int>(col) + 1};
      if (width > indents.back()) {
        indents.push_back(width);
        push(TokenKind::indent, "", span);
      } else {
        while (width < indents.back()) {
          indents.pop_back();
          push(TokenKind::dedent, "", span);
        }
        if (width != indents.back())
          throw_diagnostic(ErrorCode::IndentationError, span,
                           "unindent does not match any outer indentation level");
      }
    }

    while (col < content.size()) {
      char c = content[col];
      SourceSpan span{line, static_cast<int>(col) + 1};
      if (c == ' ' || c == '\t') {
        ++col;
      } else if (c == '#') {
        break;
      } else if (is_name_start(c)) {
        std::size_t start = col;
        while (col < content.size() && is_name_char(content[col]))
          ++col;
        push(TokenKind::name, std::string(content.substr(start, col - start)), span);
        line_has_tokens_ = true;
      } else if (is_digit(c) || (c == '.' && col + 1 < content.size() &&
                                 is_digit(content[col + 1]))) {
        std::size_t start = col;
        while (col < content.size() && is_digit(content[col]))
          ++col;
        if (col < content.size() && content[col] == '.') {
          ++col;
          while (col < content.size() && is_digit(content[col]))
            ++col;
        }
        if (col < content.size() && (content[col] == 'e' || content[col] == 'E')) {
          std::size_t save = col;
          ++col;
          if (col < content.size() && (content[col] == '+' || content[col] == '-'))
            ++col;
          if (col < content.size() && is_digit(content[col])) {
            while (col < content.size() && is_digit(content[col]))
              ++col;
          } else {
            col = save;
          }
        }
        if (col < content.size() && is_name_start(content[col]))
          throw_diagnostic(ErrorCode::SyntaxError, span, "invalid numeric literal");
        push(TokenKind::number, std::string(content.substr(start, col - start)), span);
        line_has_tokens_ = true;
      } else {
        static constexpr std::string_view two_char[] = {"**", "==", "!=", "<=", ">="};
        std::string_view rest = content.substr(col);
        std::string op;
        for (auto candidate : two_char)
          if (rest.substr(0, 2) == candidate)
            op = std::string(candidate);
        if (op.empty()) {
          if (std::string_view("+-*/()[],:=<>").find(c) == std::string_view::npos) {
            std::string shown = static_cast<unsigned char>(c) < 0x80
                                    ? std::string("'") + c + "'"
                                    : std::string("non-ASCII byte");
            throw_diagnostic(ErrorCode::SyntaxError, span, "unexpected character " + shown);
          }
          op = std::string(1, c);
        }
        if (op == "(" || op == "[") {
          if (depth_++ == 0)
            open_bracket_ = span;
        } else if (op == ")" || op == "]") {
          if (depth_ == 0)
            throw_diagnostic(ErrorCode::SyntaxError, span, "unmatched '" + op + "'");
          --depth_;
        }
        col += op.size();
        push(TokenKind::op, std::move(op), span);
        line_has_tokens_ = true;
      }
    }

    if (depth_ == 0 && line_has_tokens_) {
      push(TokenKind::newline, "", {line, static_cast<int>(content.size()) + 1});
      line_has_tokens_ = false;
    }
  }

  const std::string &text_;
  std::vector<Token> tokens_;
  int depth_ = 0;
  SourceSpan open_bracket_;
  bool line_has_tokens_ = false;
};

} // namespace

std::vector<Token> tokenize(const SourceProgram &src) {
  try {
    return Lexer(src.text).run();
  } catch (const CompileError &e) {
    throw CompileError(e.diagnostics(), src.path);
  }
}

} // namespace gts
