#pragma once

// Helpers shared by the debug and vec engines: scalar operator semantics,
// strided field views, slot-resolved statements and the multistage driver.

#include "gts/backends.hpp"

#include <cmath>
#include <cstddef>
#include <memory>
#include <vector>

namespace gts::detail {

inline double op_min(double a, double b) { return b < a ? b : a; }
inline double op_max(double a, double b) { return a < b ? b : a; }
inline double truth(bool b) { return b ? 1.0 : 0.0; }

inline double apply_unary(UnaryOp op, double a) {
  switch (op) {
  case UnaryOp::neg: return -a;
  case UnaryOp::pos: return a;
  case UnaryOp::logical_not: return truth(a == 0.0);
  }
  return a;
}

inline double apply_binary(BinaryOp op, double a, double b) {
  switch (op) {
  case BinaryOp::add: return a + b;
  case BinaryOp::sub: return a - b;
  case BinaryOp::mul: return a * b;
  case BinaryOp::div: return a / b;
  case BinaryOp::pow: return std::pow(a, b);
  case BinaryOp::lt: return truth(a < b);
  case BinaryOp::le: return truth(a <= b);
  case BinaryOp::gt: return truth(a > b);
  case BinaryOp::ge: return truth(a >= b);
  case BinaryOp::eq: return truth(a == b);
  case BinaryOp::ne: return truth(a != b);
  case BinaryOp::logical_and: return truth(a != 0.0 && b != 0.0);
  case BinaryOp::logical_or: return truth(a != 0.0 || b != 0.0);
  }
  return 0.0;
}

inline double apply_builtin(Builtin fn, const double *x) {
  switch (fn) {
  case Builtin::abs: return std::fabs(x[0]);
  case Builtin::min: return op_min(x[0], x[1]);
  case Builtin::max: return op_max(x[0], x[1]);
  case Builtin::sqrt: return std::sqrt(x[0]);
  case Builtin::exp: return std::exp(x[0]);
  case Builtin::log: return std::log(x[0]);
  case Builtin::pow: return std::pow(x[0], x[1]);
  case Builtin::floor: return std::floor(x[0]);
  case Builtin::ceil: return std::ceil(x[0]);
  }
  return 0.0;
}

/// Strided view anchored at compute-domain point (0,0,0).
struct View {
  std::byte *origin = nullptr;
  DType dtype = DType::f64;
  long si = 0, sj = 0, sk = 0;

  long index(long i, long j, long k) const { return i * si + j * sj + k * sk; }

  double load(long i, long j, long k) const {
    if (dtype == DType::f64)
      return reinterpret_cast<const double *>(origin)[index(i, j, k)];
    return reinterpret_cast<const float *>(origin)[index(i, j, k)];
  }
  void store(long i, long j, long k, double v) const {
    if (dtype == DType::f64)
      reinterpret_cast<double *>(origin)[index(i, j, k)] = v;
    else
      reinterpret_cast<float *>(origin)[index(i, j, k)] = static_cast<float>(v);
  }
};

/// Expression with field and scalar names resolved to slot indices.
struct Node {
  Expr::Kind kind = Expr::Kind::literal;
  int slot = -1; ///< field slot or scalar index
  Offset3 offset{};
  double value = 0.0;
  UnaryOp unary_op = UnaryOp::neg;
  BinaryOp binary_op = BinaryOp::add;
  Builtin builtin = Builtin::abs;
  std::vector<Node> args;
};

struct Statement {
  bool is_if = false;
  int target = -1;
  bool target_is_api = false;
  Node value; ///< right-hand side or condition
  std::vector<Statement> then_body;
  std::vector<Statement> else_body;
};

/// Horizontal box plus vertical level range evaluated by one stage call.
struct Region {
  long i0, i1, j0, j1, k0, k1;

  long ni() const { return i1 - i0; }
  long nj() const { return j1 - j0; }
  long nk() const { return k1 - k0; }
  long size() const { return ni() * nj() * nk(); }
  bool empty() const { return ni() <= 0 || nj() <= 0 || nk() <= 0; }
};

struct PreparedStage {
  long k_begin = 0, k_end = 0;
  Extent extent;
  std::size_t block = 0;
  Statement body;
};

struct PreparedMultiStage {
  IterationOrder order = IterationOrder::parallel;
  std::vector<PreparedStage> stages;
};

/// Zero-filled scratch memory for temporaries.
struct TempBuffer {
  std::unique_ptr<std::byte[]> data;
  std::size_t bytes = 0;
};

/// Takes the smallest pooled buffer of at least `bytes` (or allocates one)
/// and zero-fills its first `bytes` bytes. Buffers return to a per-thread
/// pool when their ExecutionContext is destroyed.
TempBuffer acquire_zeroed(std::size_t bytes);

/// Views, scalars and slot-resolved stages for one invocation. Temporaries
/// are zero-initialized and laid out with k contiguous.
class ExecutionContext {
public:
  ExecutionContext(const StencilImplementation &impl, const CallArguments &args);
  ~ExecutionContext();
  ExecutionContext(const ExecutionContext &) = delete;
  ExecutionContext &operator=(const ExecutionContext &) = delete;

  Index3 domain{0, 0, 0};
  std::vector<View> views; ///< api fields, then temporaries
  std::size_t api_count = 0;
  std::vector<double> scalars;
  std::vector<PreparedMultiStage> multistages;

  Region region(const PreparedStage &stage, long k0, long k1) const {
    return {stage.extent.lo[0], domain[0] + stage.extent.hi[0],
            stage.extent.lo[1], domain[1] + stage.extent.hi[1], k0, k1};
  }

  bool in_domain(long i, long j) const {
    return i >= 0 && i < domain[0] && j >= 0 && j < domain[1];
  }

private:
  std::vector<TempBuffer> temp_buffers_;
};

/// True when no stage of `ms` reads, at a horizontal offset, a field or
/// temporary written within `ms`. Columns can then be swept independently.
bool columns_independent(const PreparedMultiStage &ms);

/// Calls `run(stage, k0, k1)` for one multistage in reference order:
/// PARALLEL runs each stage over its whole interval; sequential orders run
/// each interval block level by level, every stage of the block per level.
template <typename RunStage> void drive_multistage(const PreparedMultiStage &ms, RunStage &&run) {
  if (ms.order == IterationOrder::parallel) {
    for (const auto &stage : ms.stages)
      if (stage.k_begin < stage.k_end)
        run(stage, stage.k_begin, stage.k_end);
    return;
  }
  std::size_t first = 0;
  while (first < ms.stages.size()) {
    std::size_t last = first;
    while (last < ms.stages.size() && ms.stages[last].block == ms.stages[first].block)
      ++last;
    long kb = ms.stages[first].k_begin;
    long ke = ms.stages[first].k_end;
    if (ms.order == IterationOrder::forward) {
      for (long k = kb; k < ke; ++k)
        for (std::size_t s = first; s < last; ++s)
          run(ms.stages[s], k, k + 1);
    } else {
      for (long k = ke - 1; k >= kb; --k)
        for (std::size_t s = first; s < last; ++s)
          run(ms.stages[s], k, k + 1);
    }
    first = last;
  }
}

/// drive_multistage over every multistage; empty domains are a no-op.
template <typename RunStage> void drive(const ExecutionContext &ctx, RunStage &&run) {
  if (ctx.domain[0] <= 0 || ctx.domain[1] <= 0 || ctx.domain[2] <= 0)
    return;
  for (const auto &ms : ctx.multistages)
    drive_multistage(ms, run);
}

} // namespace gts::detail
