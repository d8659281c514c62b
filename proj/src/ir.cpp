#include "gts/ir.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <set>

namespace gts {

std::string_view to_string(UnaryOp op) {
  switch (op) {
  case UnaryOp::neg: return "-";
  case UnaryOp::pos: return "+";
  case UnaryOp::logical_not: return "not";
  }
  return "?";
}

std::string_view to_string(BinaryOp op) {
  switch (op) {
  case BinaryOp::add: return "+";
  case BinaryOp::sub: return "-";
  case BinaryOp::mul: return "*";
  case BinaryOp::div: return "/";
  case BinaryOp::pow: return "**";
  case BinaryOp::lt: return "<";
  case BinaryOp::le: return "<=";
  case BinaryOp::gt: return ">";
  case BinaryOp::ge: return ">=";
  case BinaryOp::eq: return "==";
  case BinaryOp::ne: return "!=";
  case BinaryOp::logical_and: return "and";
  case BinaryOp::logical_or: return "or";
  }
  return "?";
}

namespace {

struct BuiltinInfo {
  Builtin fn;
  std::string_view name;
  std::size_t arity;
};

constexpr std::array<BuiltinInfo, 9> builtins{{
    {Builtin::abs, "abs", 1},
    {Builtin::min, "min", 2},
    {Builtin::max, "max", 2},
    {Builtin::sqrt, "sqrt", 1},
    {Builtin::exp, "exp", 1},
    {Builtin::log, "log", 1},
    {Builtin::pow, "pow", 2},
    {Builtin::floor, "floor", 1},
    {Builtin::ceil, "ceil", 1},
}};

} // namespace

std::string_view to_string(Builtin fn) {
  return builtins[static_cast<std::size_t>(fn)].name;
}

std::optional<Builtin> builtin_from_name(std::string_view name) {
  for (const auto &info : builtins)
    if (info.name == name)
      return info.fn;
  return std::nullopt;
}

std::size_t builtin_arity(Builtin fn) {
  return builtins[static_cast<std::size_t>(fn)].arity;
}

bool is_comparison(BinaryOp op) {
  return op >= BinaryOp::lt && op <= BinaryOp::ne;
}

bool is_logical(BinaryOp op) {
  return op == BinaryOp::logical_and || op == BinaryOp::logical_or;
}

Expr Expr::field(std::string name, Offset3 offset, SourceSpan span) {
  Expr e;
  e.kind = Kind::field_access;
  e.name = std::move(name);
  e.offset = offset;
  e.span = span;
  return e;
}

Expr Expr::scalar(std::string name, SourceSpan span) {
  Expr e;
  e.kind = Kind::scalar_ref;
  e.name = std::move(name);
  e.span = span;
  return e;
}

Expr Expr::literal(double value, SourceSpan span) {
  Expr e;
  e.kind = Kind::literal;
  e.value = value;
  e.span = span;
  return e;
}

Expr Expr::identifier(std::string name, SourceSpan span) {
  Expr e;
  e.kind = Kind::name;
  e.name = std::move(name);
  e.span = span;
  return e;
}

Expr Expr::unary(UnaryOp op, Expr operand, SourceSpan span) {
  Expr e;
  e.kind = Kind::unary;
  e.unary_op = op;
  e.args.push_back(std::move(operand));
  e.span = span;
  return e;
}

Expr Expr::binary(BinaryOp op, Expr lhs, Expr rhs, SourceSpan span) {
  Expr e;
  e.kind = Kind::binary;
  e.binary_op = op;
  e.args.push_back(std::move(lhs));
  e.args.push_back(std::move(rhs));
  e.span = span;
  return e;
}

Expr Expr::call_builtin(Builtin fn, std::vector<Expr> args, SourceSpan span) {
  Expr e;
  e.kind = Kind::builtin_call;
  e.builtin = fn;
  e.args = std::move(args);
  e.span = span;
  return e;
}

Expr Expr::call(std::string function, std::vector<Expr> args, SourceSpan span) {
  Expr e;
  e.kind = Kind::call;
  e.name = std::move(function);
  e.args = std::move(args);
  e.span = span;
  return e;
}

bool Expr::is_boolean() const {
  if (kind == Kind::unary)
    return unary_op == UnaryOp::logical_not;
  if (kind == Kind::binary)
    return is_comparison(binary_op) || is_logical(binary_op);
  return false;
}

Stmt Stmt::assign(Expr target, Expr value, SourceSpan span) {
  Stmt s;
  s.kind = Kind::assign;
  s.target = std::move(target);
  s.value = std::move(value);
  s.span = span;
  return s;
}

Stmt Stmt::if_else(Expr condition, std::vector<Stmt> then_body,
                   std::vector<Stmt> else_body, SourceSpan span) {
  Stmt s;
  s.kind = Kind::if_else;
  s.value = std::move(condition);
  s.then_body = std::move(then_body);
  s.else_body = std::move(else_body);
  s.span = span;
  return s;
}

AxisBound AxisBound::from_source(std::optional<int> value, bool is_end) {
  if (!value)
    return is_end ? AxisBound{LevelMarker::end, 0} : AxisBound{LevelMarker::start, 0};
  if (*value >= 0)
    return {LevelMarker::start, *value};
  return {LevelMarker::end, *value};
}

std::string to_string(const AxisBound &bound) {
  std::string out = bound.level == LevelMarker::start ? "Start" : "End";
  if (bound.offset >= 0)
    out += '+';
  out += std::to_string(bound.offset);
  return out;
}

std::string to_string(const Interval &interval) {
  return "[" + to_string(interval.start) + ", " + to_string(interval.end) + ")";
}

std::string_view to_string(IterationOrder order) {
  switch (order) {
  case IterationOrder::parallel: return "PARALLEL";
  case IterationOrder::forward: return "FORWARD";
  case IterationOrder::backward: return "BACKWARD";
  }
  return "?";
}

double to_double(const ExternalValue &value) {
  return std::visit([](auto v) { return static_cast<double>(v); }, value);
}

std::string to_string(const ExternalValue &value) {
  if (const auto *i = std::get_if<std::int64_t>(&value))
    return std::to_string(*i);
  char buffer[64];
  auto [end, ec] = std::to_chars(buffer, buffer + sizeof buffer, std::get<double>(value));
  (void)ec;
  std::string out(buffer, end);
  if (out.find_first_of(".eEn") == std::string::npos)
    out += ".0";
  return out;
}

const FieldDecl *StencilDefinition::find_field(std::string_view field) const {
  for (const auto &decl : api_fields)
    if (decl.name == field)
      return &decl;
  return nullptr;
}

const ScalarDecl *StencilDefinition::find_scalar(std::string_view scalar) const {
  for (const auto &decl : api_scalars)
    if (decl.name == scalar)
      return &decl;
  return nullptr;
}

const StencilDefinition *ParsedProgram::find_stencil(std::string_view name) const {
  for (const auto &s : stencils)
    if (s.name == name)
      return &s;
  return nullptr;
}

const FunctionDef *ParsedProgram::find_function(std::string_view name) const {
  for (const auto &f : functions)
    if (f.name == name)
      return &f;
  return nullptr;
}

Extent Extent::united(const Extent &other) const {
  Extent out;
  for (int d = 0; d < 3; ++d) {
    out.lo[d] = std::min(lo[d], other.lo[d]);
    out.hi[d] = std::max(hi[d], other.hi[d]);
  }
  return out;
}

Extent Extent::shifted(const Offset3 &offset) const {
  Extent out;
  for (int d = 0; d < 3; ++d) {
    out.lo[d] = std::min(lo[d] + offset[d], 0L);
    out.hi[d] = std::max(hi[d] + offset[d], 0L);
  }
  return out;
}

Extent Extent::horizontal() const {
  Extent out = *this;
  out.lo[2] = 0;
  out.hi[2] = 0;
  return out;
}

std::string to_string(const Extent &extent) {
  auto triple = [](const Index3 &v) {
    return "(" + std::to_string(v[0]) + "," + std::to_string(v[1]) + "," +
           std::to_string(v[2]) + ")";
  };
  return "lo=" + triple(extent.lo) + " hi=" + triple(extent.hi);
}

const TempDecl *StencilImplementation::find_temporary(std::string_view temp) const {
  for (const auto &decl : temporaries)
    if (decl.name == temp)
      return &decl;
  return nullptr;
}

std::vector<std::string> StencilImplementation::written_fields() const {
  std::set<std::string> written;
  for (const auto &ms : multistages)
    for (const auto &stage : ms.stages)
      visit_assignments(stage.body, [&](const Stmt &assign) {
        written.insert(assign.target.name);
      });
  std::vector<std::string> out;
  for (const auto &decl : api_fields)
    if (written.count(decl.name))
      out.push_back(decl.name);
  return out;
}

void visit_exprs(const Expr &expr, const std::function<void(const Expr &)> &fn) {
  fn(expr);
  for (const auto &arg : expr.args)
    visit_exprs(arg, fn);
}

void visit_exprs(const Stmt &stmt, const std::function<void(const Expr &)> &fn) {
  visit_exprs(stmt.value, fn);
  for (const auto &s : stmt.then_body)
    visit_exprs(s, fn);
  for (const auto &s : stmt.else_body)
    visit_exprs(s, fn);
}

void transform_exprs(Expr &expr, const std::function<void(Expr &)> &fn) {
  for (auto &arg : expr.args)
    transform_exprs(arg, fn);
  fn(expr);
}

void transform_exprs(Stmt &stmt, const std::function<void(Expr &)> &fn) {
  transform_exprs(stmt.value, fn);
  for (auto &s : stmt.then_body)
    transform_exprs(s, fn);
  for (auto &s : stmt.else_body)
    transform_exprs(s, fn);
}

void visit_assignments(const Stmt &stmt, const std::function<void(const Stmt &)> &fn) {
  if (stmt.kind == Stmt::Kind::assign) {
    fn(stmt);
    return;
  }
  for (const auto &s : stmt.then_body)
    visit_assignments(s, fn);
  for (const auto &s : stmt.else_body)
    visit_assignments(s, fn);
}

} // namespace gts
