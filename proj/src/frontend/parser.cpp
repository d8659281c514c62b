#include "gts/frontend.hpp"

#include <charconv>
#include <set>
#include <unordered_set>

namespace gts {

namespace {

const std::unordered_set<std::string_view> &reserved_words() {
  static const std::unordered_set<std::string_view> words{
      "stencil", "function", "with",     "computation", "interval", "if",
      "else",    "return",   "and",      "or",          "not",      "None",
      "PARALLEL", "FORWARD", "BACKWARD", "Field"};
  return words;
}

/// Python keywords outside the supported subset.
const std::unordered_set<std::string_view> &unsupported_keywords() {
  static const std::unordered_set<std::string_view> words{
      "while", "for",    "def",   "class",  "lambda", "import",   "from",
      "elif",  "try",    "except", "finally", "pass",  "break",    "continue",
      "yield", "global", "nonlocal", "del",  "assert", "in",      "is",
      "as",    "raise",  "async", "await",  "True",   "False"};
  return words;
}

std::string describe(const Token &t) {
  switch (t.kind) {
  case TokenKind::name: return "'" + t.text + "'";
  case TokenKind::number: return "number '" + t.text + "'";
  case TokenKind::op: return "'" + t.text + "'";
  case TokenKind::newline: return "end of line";
  case TokenKind::indent: return "indent";
  case TokenKind::dedent: return "dedent";
  case TokenKind::end_of_file: return "end of input";
  }
  return "token";
}

class Parser {
public:
  explicit Parser(std::vector<Token> tokens) : tokens_(std::move(tokens)) {}

  ParsedProgram parse() {
    ParsedProgram program;
    std::set<std::string> stencil_names;
    std::set<std::string> function_names;
    while (!at(TokenKind::end_of_file)) {
      if (at(TokenKind::newline)) {
        advance();
        continue;
      }
      if (at(TokenKind::indent))
        fail(ErrorCode::IndentationError, peek(), "unexpected indent");
      if (at_name("stencil")) {
        auto stencil = parse_stencil();
        if (!stencil_names.insert(stencil.name).second)
          throw_diagnostic(ErrorCode::DuplicateName, stencil.span,
                           "stencil '" + stencil.name + "' is defined twice");
        program.stencils.push_back(std::move(stencil));
      } else if (at_name("function")) {
        auto function = parse_function();
        if (!function_names.insert(function.name).second)
          throw_diagnostic(ErrorCode::DuplicateName, function.span,
                           "function '" + function.name + "' is defined twice");
        program.functions.push_back(std::move(function));
      } else {
        check_unsupported(peek());
        fail(ErrorCode::SyntaxError, peek(),
             "expected 'stencil' or 'function', found " + describe(peek()));
      }
    }
    return program;
  }

private:
  // -- token helpers --------------------------------------------------------

  const Token &peek(std::size_t ahead = 0) const {
    std::size_t i = std::min(pos_ + ahead, tokens_.size() - 1);
    return tokens_[i];
  }
  const Token &advance() {
    const Token &t = tokens_[pos_];
    if (pos_ + 1 < tokens_.size())
      ++pos_;
    return t;
  }
  bool at(TokenKind kind) const { return peek().kind == kind; }
  bool at_op(std::string_view op) const {
    return peek().kind == TokenKind::op && peek().text == op;
  }
  bool at_name(std::string_view name) const {
    return peek().kind == TokenKind::name && peek().text == name;
  }

  [[noreturn]] void fail(ErrorCode code, const Token &t, const std::string &message) const {
    throw_diagnostic(code, t.span, message);
  }

  void check_unsupported(const Token &t) const {
    if (t.kind == TokenKind::name && unsupported_keywords().count(t.text))
      fail(ErrorCode::UnknownKeyword, t, "'" + t.text + "' is not supported in stencil code");
  }

  const Token &expect_op(std::string_view op) {
    if (!at_op(op))
      fail(ErrorCode::SyntaxError, peek(),
           "expected '" + std::string(op) + "', found " + describe(peek()));
    return advance();
  }

  const Token &expect_keyword(std::string_view word) {
    if (!at_name(word))
      fail(ErrorCode::SyntaxError, peek(),
           "expected '" + std::string(word) + "', found " + describe(peek()));
    return advance();
  }

  const Token &expect_identifier(std::string_view what) {
    if (!at(TokenKind::name))
      fail(ErrorCode::SyntaxError, peek(),
           "expected " + std::string(what) + ", found " + describe(peek()));
    check_unsupported(peek());
    if (reserved_words().count(peek().text))
      fail(ErrorCode::SyntaxError, peek(),
           "'" + peek().text + "' is a reserved word and cannot be used as " +
               std::string(what));
    return advance();
  }

  void expect_newline() {
    if (!at(TokenKind::newline))
      fail(ErrorCode::SyntaxError, peek(), "expected end of line, found " + describe(peek()));
    advance();
  }

  /// Either an indented block of items or a single item on the same line.
  template <class ParseItem> void parse_suite(ParseItem &&item) {
    if (at(TokenKind::newline)) {
      advance();
      if (!at(TokenKind::indent))
        fail(ErrorCode::IndentationError, peek(), "expected an indented block");
      advance();
      while (!at(TokenKind::dedent) && !at(TokenKind::end_of_file))
        item();
      advance();
    } else {
      item();
    }
  }

  int parse_signed_int(std::string_view what) {
    int sign = 1;
    if (at_op("-") || at_op("+")) {
      if (advance().text == "-")
        sign = -1;
    }
    if (!at(TokenKind::number))
      fail(ErrorCode::SyntaxError, peek(),
           "expected integer " + std::string(what) + ", found " + describe(peek()));
    const Token &t = advance();
    int value = 0;
    auto [ptr, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), value);
    if (ec != std::errc() || ptr != t.text.data() + t.text.size())
      fail(ErrorCode::SyntaxError, t, "expected integer " + std::string(what) + ", found " +
                                          describe(t));
    return sign * value;
  }

  DType parse_dtype_name() {
    if (at_name("f32") || at_name("f64"))
      return advance().text == "f32" ? DType::f32 : DType::f64;
    fail(ErrorCode::SyntaxError, peek(), "expected 'f32' or 'f64', found " + describe(peek()));
  }

  // -- declarations -----------------------------------------------------------

  StencilDefinition parse_stencil() {
    StencilDefinition def;
    def.span = expect_keyword("stencil").span;
    def.name = expect_identifier("a stencil name").text;
    expect_op("(");
    std::set<std::string> names;
    do {
      const Token &name = expect_identifier("a parameter name");
      if (!names.insert(name.text).second)
        fail(ErrorCode::DuplicateName, name, "duplicate parameter '" + name.text + "'");
      expect_op(":");
      if (at_name("Field")) {
        advance();
        expect_op("[");
        DType dtype = parse_dtype_name();
        expect_op("]");
        def.api_fields.push_back({name.text, dtype, name.span});
      } else {
        def.api_scalars.push_back({name.text, parse_dtype_name(), name.span});
      }
    } while (at_op(",") && (advance(), true));
    expect_op(")");
    expect_op(":");
    parse_suite([&] { def.computations.push_back(parse_computation()); });
    resolve_names(def);
    return def;
  }

  FunctionDef parse_function() {
    FunctionDef fn;
    fn.span = expect_keyword("function").span;
    const Token &name = expect_identifier("a function name");
    fn.name = name.text;
    if (builtin_from_name(fn.name))
      fail(ErrorCode::DuplicateName, name, "function '" + fn.name + "' shadows a builtin");
    expect_op("(");
    std::set<std::string> names;
    if (!at_op(")")) {
      do {
        const Token &param = expect_identifier("a parameter name");
        if (!names.insert(param.text).second)
          fail(ErrorCode::DuplicateName, param, "duplicate parameter '" + param.text + "'");
        fn.params.push_back(param.text);
      } while (at_op(",") && (advance(), true));
    }
    expect_op(")");
    expect_op(":");
    bool returned = false;
    parse_suite([&] {
      if (returned)
        fail(ErrorCode::SyntaxError, peek(), "statements after 'return' in function '" +
                                                 fn.name + "'");
      if (at_name("return")) {
        advance();
        fn.result = parse_value();
        expect_newline();
        returned = true;
        return;
      }
      if (at_name("if") || at_name("with"))
        fail(ErrorCode::SyntaxError, peek(),
             "functions may contain only assignments and one return");
      Stmt stmt = parse_assign();
      if (stmt.target.offset != Offset3{0, 0, 0})
        fail(ErrorCode::SyntaxError, tokens_[pos_ - 1],
             "function locals must be assigned without an offset");
      fn.body.push_back(std::move(stmt));
    });
    if (!returned)
      throw_diagnostic(ErrorCode::SyntaxError, fn.span,
                       "function '" + fn.name + "' has no return statement");
    return fn;
  }

  Computation parse_computation() {
    Computation comp;
    check_unsupported(peek());
    comp.span = expect_keyword("with").span;
    if (!at_name("computation")) {
      if (at(TokenKind::name))
        fail(ErrorCode::UnknownKeyword, peek(),
             "expected 'computation', found '" + peek().text + "'");
      fail(ErrorCode::SyntaxError, peek(), "expected 'computation', found " + describe(peek()));
    }
    advance();
    expect_op("(");
    if (!at(TokenKind::name))
      fail(ErrorCode::SyntaxError, peek(), "expected iteration order, found " + describe(peek()));
    const Token &order = advance();
    if (order.text == "PARALLEL")
      comp.order = IterationOrder::parallel;
    else if (order.text == "FORWARD")
      comp.order = IterationOrder::forward;
    else if (order.text == "BACKWARD")
      comp.order = IterationOrder::backward;
    else
      fail(ErrorCode::UnknownKeyword, order,
           "unknown iteration order '" + order.text +
               "' (expected PARALLEL, FORWARD or BACKWARD)");
    expect_op(")");
    expect_op(":");

    enum class Mode { undecided, intervals, statements } mode = Mode::undecided;
    parse_suite([&] {
      bool is_interval = at_name("with") && peek(1).kind == TokenKind::name &&
                         peek(1).text == "interval";
      if (mode == Mode::undecided) {
        mode = is_interval ? Mode::intervals : Mode::statements;
        if (!is_interval)
          comp.blocks.push_back(IntervalBlock{std::nullopt, {}, peek().span});
      } else if ((mode == Mode::intervals) != is_interval) {
        fail(ErrorCode::SyntaxError, peek(),
             "a computation body must contain either only interval blocks or only "
             "statements");
      }
      if (is_interval)
        comp.blocks.push_back(parse_interval());
      else
        comp.blocks.back().body.push_back(parse_statement());
    });
    return comp;
  }

  IntervalBlock parse_interval() {
    IntervalBlock block;
    block.span = expect_keyword("with").span;
    expect_keyword("interval");
    expect_op("(");
    auto parse_bound = [&](bool is_end) {
      if (at_name("None")) {
        advance();
        return AxisBound::from_source(std::nullopt, is_end);
      }
      return AxisBound::from_source(parse_signed_int("interval bound"), is_end);
    };
    Interval interval;
    interval.start = parse_bound(false);
    expect_op(",");
    interval.end = parse_bound(true);
    expect_op(")");
    expect_op(":");
    block.interval = interval;
    parse_suite([&] { block.body.push_back(parse_statement()); });
    return block;
  }

  // -- statements ---------------------------------------------------------------

  Stmt parse_statement() {
    check_unsupported(peek());
    if (at_name("if"))
      return parse_if();
    if (at_name("with"))
      fail(ErrorCode::SyntaxError, peek(), "'with' blocks cannot be nested inside statements");
    if (at_name("return"))
      fail(ErrorCode::SyntaxError, peek(), "'return' is only allowed inside functions");
    if (at_name("else"))
      fail(ErrorCode::SyntaxError, peek(), "'else' without a matching 'if'");
    return parse_assign();
  }

  Stmt parse_if() {
    SourceSpan span = expect_keyword("if").span;
    in_condition_ = true;
    Expr condition = parse_condition();
    in_condition_ = false;
    expect_op(":");
    std::vector<Stmt> then_body, else_body;
    parse_suite([&] { then_body.push_back(parse_statement()); });
    if (at_name("else")) {
      advance();
      expect_op(":");
      parse_suite([&] { else_body.push_back(parse_statement()); });
    }
    return Stmt::if_else(std::move(condition), std::move(then_body), std::move(else_body), span);
  }

  Stmt parse_assign() {
    const Token &name = expect_identifier("an assignment target");
    Offset3 offset{0, 0, 0};
    if (at_op("["))
      offset = parse_offset();
    if (!at_op("=")) {
      if (at_op("=="))
        fail(ErrorCode::SyntaxError, peek(), "expected '=', found '=='");
      fail(ErrorCode::SyntaxError, peek(), "expected '=', found " + describe(peek()));
    }
    const Token &eq = advance();
    Expr value = parse_value();
    expect_newline();
    return Stmt::assign(Expr::field(name.text, offset, name.span), std::move(value), eq.span);
  }

  Offset3 parse_offset() {
    const Token &open = expect_op("[");
    Offset3 offset{};
    for (int d = 0; d < 3; ++d) {
      if (d > 0) {
        if (at_op("]"))
          fail(ErrorCode::SyntaxError, open, "field offsets need exactly three components");
        expect_op(",");
      }
      offset[d] = parse_signed_int("offset");
    }
    if (!at_op("]"))
      fail(ErrorCode::SyntaxError, peek(), "field offsets need exactly three components");
    advance();
    return offset;
  }

  // -- expressions --------------------------------------------------------------

  Expr parse_value() {
    bool saved = in_condition_;
    in_condition_ = false;
    Expr e = parse_arith();
    in_condition_ = saved;
    if (peek().kind == TokenKind::op &&
        (peek().text == "<" || peek().text == ">" || peek().text == "<=" ||
         peek().text == ">=" || peek().text == "==" || peek().text == "!="))
      fail(ErrorCode::SyntaxError, peek(),
           "comparison operators are only allowed in if conditions");
    if (at_name("and") || at_name("or"))
      fail(ErrorCode::SyntaxError, peek(),
           "boolean operators are only allowed in if conditions");
    return e;
  }

  Expr parse_condition() { return parse_or(); }

  Expr parse_or() {
    Expr lhs = parse_and();
    while (at_name("or")) {
      SourceSpan span = advance().span;
      lhs = Expr::binary(BinaryOp::logical_or, std::move(lhs), parse_and(), span);
    }
    return lhs;
  }

  Expr parse_and() {
    Expr lhs = parse_not();
    while (at_name("and")) {
      SourceSpan span = advance().span;
      lhs = Expr::binary(BinaryOp::logical_and, std::move(lhs), parse_not(), span);
    }
    return lhs;
  }

  Expr parse_not() {
    if (at_name("not")) {
      SourceSpan span = advance().span;
      return Expr::unary(UnaryOp::logical_not, parse_not(), span);
    }
    return parse_comparison();
  }

  std::optional<BinaryOp> comparison_op() const {
    if (peek().kind != TokenKind::op)
      return std::nullopt;
    const std::string &t = peek().text;
    if (t == "<") return BinaryOp::lt;
    if (t == "<=") return BinaryOp::le;
    if (t == ">") return BinaryOp::gt;
    if (t == ">=") return BinaryOp::ge;
    if (t == "==") return BinaryOp::eq;
    if (t == "!=") return BinaryOp::ne;
    return std::nullopt;
  }

  Expr parse_comparison() {
    Expr lhs = parse_arith();
    if (auto op = comparison_op()) {
      SourceSpan span = advance().span;
      lhs = Expr::binary(*op, std::move(lhs), parse_arith(), span);
      if (comparison_op())
        fail(ErrorCode::SyntaxError, peek(), "chained comparisons are not supported");
    }
    return lhs;
  }

  Expr parse_arith() {
    Expr lhs = parse_term();
    while (at_op("+") || at_op("-")) {
      const Token &op = advance();
      BinaryOp kind = op.text == "+" ? BinaryOp::add : BinaryOp::sub;
      lhs = Expr::binary(kind, std::move(lhs), parse_term(), op.span);
    }
    return lhs;
  }

  Expr parse_term() {
    Expr lhs = parse_factor();
    while (at_op("*") || at_op("/")) {
      const Token &op = advance();
      BinaryOp kind = op.text == "*" ? BinaryOp::mul : BinaryOp::div;
      lhs = Expr::binary(kind, std::move(lhs), parse_factor(), op.span);
    }
    return lhs;
  }

  Expr parse_factor() {
    if (at_op("-") || at_op("+")) {
      const Token &op = advance();
      UnaryOp kind = op.text == "-" ? UnaryOp::neg : UnaryOp::pos;
      return Expr::unary(kind, parse_factor(), op.span);
    }
    return parse_power();
  }

  Expr parse_power() {
    Expr base = parse_primary();
    if (at_op("**")) {
      SourceSpan span = advance().span;
      return Expr::binary(BinaryOp::pow, std::move(base), parse_factor(), span);
    }
    return base;
  }

  Expr parse_primary() {
    const Token &t = peek();
    if (t.kind == TokenKind::number) {
      advance();
      double value = 0.0;
      auto [ptr, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), value);
      if (ec == std::errc::result_out_of_range)
        fail(ErrorCode::SyntaxError, t, "numeric literal out of range");
      if (ec != std::errc() || ptr != t.text.data() + t.text.size())
        fail(ErrorCode::SyntaxError, t, "invalid numeric literal '" + t.text + "'");
      return Expr::literal(value, t.span);
    }
    if (t.kind == TokenKind::op && t.text == "(") {
      advance();
      Expr inner = in_condition_ ? parse_or() : parse_arith();
      expect_op(")");
      return inner;
    }
    if (t.kind == TokenKind::name) {
      check_unsupported(t);
      if (reserved_words().count(t.text))
        fail(ErrorCode::SyntaxError, t, "unexpected keyword '" + t.text + "' in expression");
      advance();
      if (at_op("("))
        return parse_call(t);
      if (at_op("["))
        return Expr::field(t.text, parse_offset(), t.span);
      return Expr::identifier(t.text, t.span);
    }
    fail(ErrorCode::SyntaxError, t, "expected an expression, found " + describe(t));
  }

  Expr parse_call(const Token &name) {
    expect_op("(");
    std::vector<Expr> args;
    bool saved = in_condition_;
    in_condition_ = false;
    if (!at_op(")")) {
      do {
        args.push_back(parse_arith());
      } while (at_op(",") && (advance(), true));
    }
    in_condition_ = saved;
    expect_op(")");
    if (auto fn = builtin_from_name(name.text)) {
      if (args.size() != builtin_arity(*fn))
        fail(ErrorCode::ArityError, name,
             "builtin '" + name.text + "' takes " + std::to_string(builtin_arity(*fn)) +
                 " argument(s), got " + std::to_string(args.size()));
      return Expr::call_builtin(*fn, std::move(args), name.span);
    }
    return Expr::call(name.text, std::move(args), name.span);
  }

  // -- name resolution ------------------------------------------------------------

  /// Turns bare identifiers naming fields/temporaries into [0,0,0] accesses and
  /// scalar parameters into scalar references. Remaining identifiers are
  /// externals.
  void resolve_names(StencilDefinition &def) {
    std::set<std::string> assigned;
    for (const auto &comp : def.computations)
      for (const auto &block : comp.blocks)
        for (const auto &stmt : block.body)
          visit_assignments(stmt, [&](const Stmt &s) { assigned.insert(s.target.name); });

    auto resolve = [&](Expr &e) {
      if (e.kind == Expr::Kind::name) {
        if (def.find_field(e.name) || assigned.count(e.name))
          e = Expr::field(e.name, {0, 0, 0}, e.span);
        else if (def.find_scalar(e.name))
          e = Expr::scalar(e.name, e.span);
      } else if (e.kind == Expr::Kind::field_access) {
        if (def.find_scalar(e.name))
          throw_diagnostic(ErrorCode::TypeError, e.span,
                           "scalar parameter '" + e.name + "' cannot be indexed");
        if (!def.find_field(e.name) && !assigned.count(e.name))
          throw_diagnostic(ErrorCode::UseBeforeDefine, e.span,
                           "'" + e.name + "' is read but is neither a field parameter nor "
                           "assigned anywhere");
      }
    };
    for (auto &comp : def.computations)
      for (auto &block : comp.blocks)
        for (auto &stmt : block.body)
          transform_exprs(stmt, resolve);
  }

  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
  bool in_condition_ = false;
};

} // namespace

ParsedProgram parse_program(const SourceProgram &src) {
  auto tokens = tokenize(src);
  try {
    return Parser(std::move(tokens)).parse();
  } catch (const CompileError &e) {
    throw CompileError(e.diagnostics(), src.path);
  }
}

} // namespace gts
