#include "gts/frontend.hpp"

#include <charconv>
#include <map>

namespace gts {

namespace {

/// What a function parameter is bound to at one call site.
struct Binding {
  Expr value;              ///< substituted for a bare use
  bool is_field = false;   ///< value is a field access; offsets compose
  bool has_offset_use = false;
};

bool uses_param_with_offset(const FunctionDef &fn, const std::string &param) {
  bool found = false;
  auto check = [&](const Expr &e) {
    if (e.kind == Expr::Kind::field_access && e.name == param && e.offset != Offset3{0, 0, 0})
      found = true;
  };
  for (const auto &stmt : fn.body)
    visit_exprs(stmt, check);
  visit_exprs(fn.result, check);
  return found;
}

class Inliner {
public:
  explicit Inliner(std::span<const FunctionDef> functions) : functions_(functions) {}

  std::vector<Stmt> inline_block(const std::vector<Stmt> &stmts) {
    std::vector<Stmt> out;
    for (const auto &stmt : stmts) {
      if (stmt.kind == Stmt::Kind::assign) {
        Stmt copy = stmt;
        copy.value = inline_expr(stmt.value, out);
        out.push_back(std::move(copy));
      } else {
        Stmt copy = stmt;
        copy.value = inline_expr(stmt.value, out);
        copy.then_body = inline_block(stmt.then_body);
        copy.else_body = inline_block(stmt.else_body);
        out.push_back(std::move(copy));
      }
    }
    return out;
  }

private:
  const FunctionDef *find(std::string_view name) const {
    for (const auto &fn : functions_)
      if (fn.name == name)
        return &fn;
    return nullptr;
  }

  std::string fresh_name(const std::string &function, const std::string &local) {
    return function + "__" + local + "__" + std::to_string(++counter_);
  }

  /// Returns `expr` with all user calls expanded; statements computing
  /// function locals are appended to `prelude`.
  Expr inline_expr(const Expr &expr, std::vector<Stmt> &prelude) {
    Expr out = expr;
    for (auto &arg : out.args)
      arg = inline_expr(arg, prelude);
    if (out.kind != Expr::Kind::call)
      return out;
    return expand_call(out, prelude);
  }

  Expr expand_call(const Expr &call, std::vector<Stmt> &prelude) {
    const FunctionDef *fn = find(call.name);
    if (!fn)
      throw_diagnostic(ErrorCode::UnknownFunction, call.span,
                       "unknown function '" + call.name + "'");
    if (call.args.size() != fn->params.size())
      throw_diagnostic(ErrorCode::ArityError, call.span,
                       "function '" + fn->name + "' takes " +
                           std::to_string(fn->params.size()) + " argument(s), got " +
                           std::to_string(call.args.size()));
    for (const auto &active : stack_)
      if (active == fn->name)
        throw_diagnostic(ErrorCode::RecursionError, call.span,
                         "recursive call to function '" + fn->name + "'");

    std::map<std::string, Binding> bindings;
    for (std::size_t i = 0; i < fn->params.size(); ++i) {
      const std::string &param = fn->params[i];
      const Expr &arg = call.args[i];
      Binding b;
      b.has_offset_use = uses_param_with_offset(*fn, param);
      if (arg.kind == Expr::Kind::field_access) {
        b.value = arg;
        b.is_field = true;
      } else if (arg.kind == Expr::Kind::literal || arg.kind == Expr::Kind::scalar_ref ||
                 arg.kind == Expr::Kind::name) {
        if (b.has_offset_use)
          throw_diagnostic(ErrorCode::InvalidArgument, arg.span,
                           "argument " + std::to_string(i + 1) + " of '" + fn->name +
                               "' is read at an offset and must be a field");
        b.value = arg;
      } else if (b.has_offset_use) {
        // General expression read at offsets: materialize it as a temporary.
        std::string temp = fresh_name(fn->name, param);
        prelude.push_back(Stmt::assign(Expr::field(temp, {0, 0, 0}, arg.span), arg, arg.span));
        b.value = Expr::field(temp, {0, 0, 0}, arg.span);
        b.is_field = true;
      } else {
        b.value = arg;
      }
      bindings.emplace(param, std::move(b));
    }

    std::map<std::string, std::string> locals;
    auto substitute = [&](const Expr &body_expr) {
      Expr e = body_expr;
      transform_exprs(e, [&](Expr &node) {
        if (node.kind == Expr::Kind::name) {
          if (auto lt = locals.find(node.name); lt != locals.end()) {
            node = Expr::field(lt->second, {0, 0, 0}, node.span);
          } else if (auto it = bindings.find(node.name); it != bindings.end()) {
            SourceSpan span = node.span;
            node = it->second.value;
            node.span = span;
          }
        } else if (node.kind == Expr::Kind::field_access) {
          if (auto lt = locals.find(node.name); lt != locals.end()) {
            node.name = lt->second;
          } else if (auto it = bindings.find(node.name); it != bindings.end()) {
            const Binding &b = it->second;
            if (!b.is_field) {
              SourceSpan span = node.span;
              node = b.value;
              node.span = span;
              return;
            }
            Offset3 composed = node.offset;
            for (int d = 0; d < 3; ++d)
              composed[d] += b.value.offset[d];
            node = Expr::field(b.value.name, composed, node.span);
          } else {
            throw_diagnostic(ErrorCode::UnknownName, node.span,
                             "'" + node.name + "' is neither a parameter nor a local of "
                             "function '" + fn->name + "'");
          }
        }
      });
      return e;
    };

    stack_.push_back(fn->name);
    for (const auto &stmt : fn->body) {
      Expr value = inline_expr(substitute(stmt.value), prelude);
      std::string &local = locals[stmt.target.name];
      local = fresh_name(fn->name, stmt.target.name);
      prelude.push_back(Stmt::assign(Expr::field(local, {0, 0, 0}, stmt.target.span),
                                     std::move(value), stmt.span));
    }
    Expr result = inline_expr(substitute(fn->result), prelude);
    stack_.pop_back();
    return result;
  }

  std::span<const FunctionDef> functions_;
  std::vector<std::string> stack_;
  int counter_ = 0;
};

} // namespace

StencilDefinition inline_functions(const StencilDefinition &stencil,
                                   std::span<const FunctionDef> functions) {
  StencilDefinition out = stencil;
  Inliner inliner(functions);
  for (auto &comp : out.computations)
    for (auto &block : comp.blocks)
      block.body = inliner.inline_block(block.body);
  return out;
}

StencilDefinition bind_externals(const StencilDefinition &stencil,
                                 const ExternalsBinding &externals) {
  StencilDefinition out = stencil;
  for (auto &comp : out.computations)
    for (auto &block : comp.blocks)
      for (auto &stmt : block.body)
        transform_exprs(stmt, [&](Expr &e) {
          if (e.kind != Expr::Kind::name)
            return;
          auto it = externals.find(e.name);
          if (it == externals.end())
            throw_diagnostic(ErrorCode::UnboundExternal, e.span,
                             "no compile-time value bound for '" + e.name + "'");
          out.externals[e.name] = it->second;
          e = Expr::literal(to_double(it->second), e.span);
        });
  return out;
}

void parse_external_assignment(std::string_view text, ExternalsBinding &binding) {
  auto eq = text.find('=');
  if (eq == std::string_view::npos || eq == 0)
    throw Error(ErrorCode::TypeError, "external binding '" + std::string(text) +
                                          "' must have the form NAME=VALUE");
  std::string name(text.substr(0, eq));
  std::string_view value = text.substr(eq + 1);
  const char *first = value.data();
  const char *last = value.data() + value.size();
  std::int64_t integer = 0;
  auto [iptr, iec] = std::from_chars(first, last, integer);
  if (iec == std::errc() && iptr == last) {
    binding[name] = integer;
    return;
  }
  double real = 0.0;
  auto [dptr, dec] = std::from_chars(first, last, real);
  if (dec == std::errc() && dptr == last && !value.empty()) {
    binding[name] = real;
    return;
  }
  throw Error(ErrorCode::TypeError, "external '" + name + "' must be numeric, got '" +
                                        std::string(value) + "'");
}

StencilDefinition load_stencil(const SourceProgram &src, std::string_view stencil_name,
                               const ExternalsBinding &externals) {
  ParsedProgram program = parse_program(src);
  const StencilDefinition *def = program.find_stencil(stencil_name);
  if (!def) {
    std::string available;
    for (const auto &s : program.stencils)
      available += (available.empty() ? "" : ", ") + s.name;
    throw CompileError({Diagnostic{Severity::error, ErrorCode::UnknownStencil, {},
                                   "no stencil named '" + std::string(stencil_name) +
                                       "' (available: " + available + ")"}},
                       src.path);
  }
  try {
    return bind_externals(inline_functions(*def, program.functions), externals);
  } catch (const CompileError &e) {
    throw CompileError(e.diagnostics(), src.path);
  }
}

} // namespace gts
