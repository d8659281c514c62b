#pragma once

#include "gts/common.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace gts {

// ---------------------------------------------------------------------------
// Expressions and statements (shared by the definition and implementation IR)
// ---------------------------------------------------------------------------

enum class UnaryOp { neg, pos, logical_not };

enum class BinaryOp {
  add,
  sub,
  mul,
  div,
  pow,
  lt,
  le,
  gt,
  ge,
  eq,
  ne,
  logical_and,
  logical_or,
};

enum class Builtin { abs, min, max, sqrt, exp, log, pow, floor, ceil };

std::string_view to_string(UnaryOp op);
std::string_view to_string(BinaryOp op);
std::string_view to_string(Builtin fn);
std::optional<Builtin> builtin_from_name(std::string_view name);
std::size_t builtin_arity(Builtin fn);
bool is_comparison(BinaryOp op);
bool is_logical(BinaryOp op);

struct Expr {
  enum class Kind {
    field_access, ///< name[offset]
    scalar_ref,   ///< read-only scalar parameter
    literal,      ///< f64 constant
    name,         ///< unresolved identifier (external or function parameter)
    unary,
    binary,
    builtin_call,
    call, ///< user function call, removed by inlining
  };

  Kind kind = Kind::literal;
  SourceSpan span;
  std::string name;
  Offset3 offset{};
  double value = 0.0;
  UnaryOp unary_op = UnaryOp::neg;
  BinaryOp binary_op = BinaryOp::add;
  Builtin builtin = Builtin::abs;
  std::vector<Expr> args;

  static Expr field(std::string name, Offset3 offset, SourceSpan span = {});
  static Expr scalar(std::string name, SourceSpan span = {});
  static Expr literal(double value, SourceSpan span = {});
  static Expr identifier(std::string name, SourceSpan span = {});
  static Expr unary(UnaryOp op, Expr operand, SourceSpan span = {});
  static Expr binary(BinaryOp op, Expr lhs, Expr rhs, SourceSpan span = {});
  static Expr call_builtin(Builtin fn, std::vector<Expr> args, SourceSpan span = {});
  static Expr call(std::string function, std::vector<Expr> args, SourceSpan span = {});

  /// True for comparisons and logical operators (values usable only as
  /// conditions).
  bool is_boolean() const;
};

struct Stmt {
  enum class Kind { assign, if_else };

  Kind kind = Kind::assign;
  SourceSpan span;
  Expr target; ///< assign: field access being written
  Expr value;  ///< assign: right-hand side; if_else: condition
  std::vector<Stmt> then_body;
  std::vector<Stmt> else_body;

  static Stmt assign(Expr target, Expr value, SourceSpan span = {});
  static Stmt if_else(Expr condition, std::vector<Stmt> then_body,
                      std::vector<Stmt> else_body, SourceSpan span = {});

  const Expr &condition() const { return value; }
};

// ---------------------------------------------------------------------------
// Vertical intervals
// ---------------------------------------------------------------------------

enum class LevelMarker : std::uint8_t { start = 0, end = 1 };

struct AxisBound {
  LevelMarker level = LevelMarker::start;
  int offset = 0;

  /// Concrete level index for a vertical domain of size `nk`.
  long resolve(long nk) const {
    return level == LevelMarker::start ? offset : nk + offset;
  }
  /// Nonnegative source integers anchor at Start, negative at End; `None`
  /// is (End, 0) as an end bound and (Start, 0) as a start bound.
  static AxisBound from_source(std::optional<int> value, bool is_end);

  friend bool operator==(const AxisBound &, const AxisBound &) = default;
  /// Order of the bounds for sufficiently large domains.
  friend bool operator<(const AxisBound &a, const AxisBound &b) {
    return a.level != b.level ? a.level < b.level : a.offset < b.offset;
  }
};

/// Half-open vertical range [start, end).
struct Interval {
  AxisBound start;
  AxisBound end{LevelMarker::end, 0};

  static Interval full() { return {}; }

  friend bool operator==(const Interval &, const Interval &) = default;
};

std::string to_string(const AxisBound &bound);
std::string to_string(const Interval &interval);

enum class IterationOrder : std::uint8_t { parallel = 0, forward = 1, backward = 2 };

std::string_view to_string(IterationOrder order);

// ---------------------------------------------------------------------------
// Definition IR
// ---------------------------------------------------------------------------

struct IntervalBlock {
  /// Empty for a computation written without `with interval`; filled in by
  /// interval normalization.
  std::optional<Interval> interval;
  std::vector<Stmt> body;
  SourceSpan span;
};

struct Computation {
  IterationOrder order = IterationOrder::parallel;
  std::vector<IntervalBlock> blocks;
  SourceSpan span;
};

struct FieldDecl {
  std::string name;
  DType dtype = DType::f64;
  SourceSpan span;
};

struct ScalarDecl {
  std::string name;
  DType dtype = DType::f64;
  SourceSpan span;
};

using ExternalValue = std::variant<std::int64_t, double>;
using ExternalsBinding = std::map<std::string, ExternalValue>;

double to_double(const ExternalValue &value);
std::string to_string(const ExternalValue &value);

struct StencilDefinition {
  std::string name;
  SourceSpan span;
  std::vector<FieldDecl> api_fields;
  std::vector<ScalarDecl> api_scalars;
  std::vector<Computation> computations;
  /// Compile-time bindings applied by bind_externals.
  ExternalsBinding externals;

  const FieldDecl *find_field(std::string_view field) const;
  const ScalarDecl *find_scalar(std::string_view scalar) const;
};

struct FunctionDef {
  std::string name;
  SourceSpan span;
  std::vector<std::string> params;
  std::vector<Stmt> body; ///< assignments to function locals
  Expr result;
};

struct ParsedProgram {
  std::vector<StencilDefinition> stencils;
  std::vector<FunctionDef> functions;

  const StencilDefinition *find_stencil(std::string_view name) const;
  const FunctionDef *find_function(std::string_view name) const;
};

// ---------------------------------------------------------------------------
// Extents
// ---------------------------------------------------------------------------

/// Per-axis halo bounds with lo <= 0 <= hi.
struct Extent {
  Index3 lo{0, 0, 0};
  Index3 hi{0, 0, 0};

  static Extent zero() { return {}; }

  bool is_zero() const { return *this == Extent{}; }
  Extent united(const Extent &other) const;
  /// Extent of the points touched when reading at `offset` from every point
  /// of this extent; the result always contains the origin.
  Extent shifted(const Offset3 &offset) const;
  /// Copy with the vertical components zeroed.
  Extent horizontal() const;

  friend bool operator==(const Extent &, const Extent &) = default;
};

std::string to_string(const Extent &extent);

// ---------------------------------------------------------------------------
// Implementation IR
// ---------------------------------------------------------------------------

struct Stage {
  Interval interval;
  /// Index of the interval block this stage came from within its multistage.
  std::size_t block = 0;
  Stmt body;
  Extent compute_extent;
};

struct MultiStage {
  IterationOrder order = IterationOrder::parallel;
  std::vector<Stage> stages;
};

struct TempDecl {
  std::string name;
  DType dtype = DType::f64;
  /// Allocation extent around the compute domain (vertical components
  /// included).
  Extent extent;
};

struct StencilImplementation {
  std::string name;
  std::vector<FieldDecl> api_fields;
  std::vector<ScalarDecl> api_scalars;
  std::vector<MultiStage> multistages;
  std::vector<TempDecl> temporaries;
  std::map<std::string, Extent> field_extents;
  long k_min = 1;
  ExternalsBinding externals;

  const TempDecl *find_temporary(std::string_view temp) const;
  /// Names of api fields assigned anywhere in the stencil.
  std::vector<std::string> written_fields() const;
};

// ---------------------------------------------------------------------------
// Traversal helpers
// ---------------------------------------------------------------------------

void visit_exprs(const Expr &expr, const std::function<void(const Expr &)> &fn);
void visit_exprs(const Stmt &stmt, const std::function<void(const Expr &)> &fn);
void transform_exprs(Expr &expr, const std::function<void(Expr &)> &fn);
void transform_exprs(Stmt &stmt, const std::function<void(Expr &)> &fn);
void visit_assignments(const Stmt &stmt, const std::function<void(const Stmt &)> &fn);

} // namespace gts
