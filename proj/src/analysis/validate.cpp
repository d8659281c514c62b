#include "gts/analysis.hpp"

#include <set>

namespace gts {

namespace {

bool horizontal_offset(const Offset3 &o) { return o[0] != 0 || o[1] != 0; }

std::set<std::string> assigned_names(const std::vector<Stmt> &stmts) {
  std::set<std::string> out;
  for (const auto &stmt : stmts)
    visit_assignments(stmt, [&](const Stmt &s) { out.insert(s.target.name); });
  return out;
}

class Validator {
public:
  Validator(const StencilDefinition &def, std::vector<Diagnostic> &out)
      : def_(def), out_(out) {}

  void run() {
    for (const auto &comp : def_.computations) {
      written_.clear();
      for (const auto &block : comp.blocks) {
        auto names = assigned_names(block.body);
        written_.insert(names.begin(), names.end());
      }
      order_ = comp.order;
      for (const auto &block : comp.blocks)
        for (const auto &stmt : block.body) {
          if (stmt.kind == Stmt::Kind::if_else)
            check_if_block(stmt);
          check_stmt(stmt);
        }
    }
  }

private:
  void error(ErrorCode code, SourceSpan span, std::string message) {
    out_.push_back({Severity::error, code, span, std::move(message)});
  }

  void check_stmt(const Stmt &stmt) {
    if (stmt.kind == Stmt::Kind::if_else) {
      visit_exprs(stmt.value, [&](const Expr &e) {
        if (e.kind == Expr::Kind::field_access)
          check_read(e);
      });
      for (const auto &s : stmt.then_body)
        check_stmt(s);
      for (const auto &s : stmt.else_body)
        check_stmt(s);
      return;
    }

    const Expr &target = stmt.target;
    if (target.offset != Offset3{0, 0, 0})
      error(ErrorCode::TargetOffset, target.span,
            "assignment target '" + target.name + "' must not carry a nonzero offset");
    if (def_.find_scalar(target.name))
      error(ErrorCode::ScalarAssignment, target.span,
            "scalar parameter '" + target.name + "' is read-only");

    visit_exprs(stmt.value, [&](const Expr &e) {
      if (e.kind != Expr::Kind::field_access)
        return;
      if (e.name == target.name && e.offset != Offset3{0, 0, 0}) {
        if (order_ == IterationOrder::parallel) {
          error(ErrorCode::SelfAssignParallel, e.span,
                "'" + target.name +
                    "' is read at a nonzero offset in its own assignment inside a PARALLEL "
                    "computation");
          return;
        }
        if (horizontal_offset(e.offset)) {
          error(ErrorCode::SelfOffsetRead, e.span,
                "'" + target.name +
                    "' is read at a nonzero horizontal offset in its own assignment");
          return;
        }
      }
      check_read(e);
    });
  }

  void check_read(const Expr &e) {
    if (!written_.count(e.name))
      return;
    int dk = e.offset[2];
    switch (order_) {
    case IterationOrder::forward:
      if (dk > 0)
        error(ErrorCode::VerticalOrderViolation, e.span,
              "'" + e.name + "' is written in this FORWARD computation and cannot be read "
              "at a positive vertical offset");
      break;
    case IterationOrder::backward:
      if (dk < 0)
        error(ErrorCode::VerticalOrderViolation, e.span,
              "'" + e.name + "' is written in this BACKWARD computation and cannot be read "
              "at a negative vertical offset");
      break;
    case IterationOrder::parallel:
      if (dk != 0)
        error(ErrorCode::ParallelVerticalDependence, e.span,
              "'" + e.name + "' is written in this PARALLEL computation and cannot be read "
              "at a vertical offset");
      break;
    }
  }

  /// Points of an if/else block execute their branch statements one after
  /// another, so values written in the block may only be read at the same
  /// horizontal position.
  void check_if_block(const Stmt &stmt) {
    std::set<std::string> block_written = assigned_names(stmt.then_body);
    auto more = assigned_names(stmt.else_body);
    block_written.insert(more.begin(), more.end());
    visit_exprs(stmt, [&](const Expr &e) {
      if (e.kind == Expr::Kind::field_access && block_written.count(e.name) &&
          horizontal_offset(e.offset))
        error(ErrorCode::IfBlockOffsetRead, e.span,
              "'" + e.name +
                  "' is written inside this if/else block and cannot be read at a "
                  "horizontal offset within it");
    });
  }

  const StencilDefinition &def_;
  std::vector<Diagnostic> &out_;
  std::set<std::string> written_;
  IterationOrder order_ = IterationOrder::parallel;
};

} // namespace

std::vector<Diagnostic> validate_semantics(const StencilDefinition &def) {
  std::vector<Diagnostic> out;
  if (def.computations.empty())
    out.push_back({Severity::error, ErrorCode::SyntaxError, def.span,
                   "stencil '" + def.name + "' has no computations"});
  Validator(def, out).run();
  return out;
}

} // namespace gts
