#include "exec_common.hpp"

#include <algorithm>
#include <cstring>
#include <limits>
#include <type_traits>

namespace gts {

namespace {

using detail::ExecutionContext;
using detail::Node;
using detail::PreparedStage;
using detail::Region;
using detail::Statement;
using detail::View;

/// Target number of points per slab. Whole i rows are processed together so
/// operands of one slab stay cache resident.
constexpr long kSlabPoints = 8192;
/// Columns per slab when a sequential multistage is swept column by column.
constexpr long kColumnSlabPoints = 1024;

/// Slab operand: either one broadcast value or one value per point
/// (i outermost, k innermost).
struct Array {
  bool uniform = true;
  double c = 0.0;
  std::size_t n = 0;        ///< logical length; data may be larger
  std::vector<double> data; ///< pooled storage

  double at(std::size_t q) const { return uniform ? c : data[q]; }
};

Array uniform(double c) {
  Array a;
  a.c = c;
  return a;
}

class BulkEngine {
public:
  explicit BulkEngine(const ExecutionContext &ctx) : ctx_(ctx) {}

  /// Restricts following stage calls to rows [i0, i1).
  void set_window(long i0, long i1) {
    window_i0_ = i0;
    window_i1_ = i1;
  }

  void run_stage(const PreparedStage &stage, long k0, long k1) {
    Region whole = ctx_.region(stage, k0, k1);
    whole.i0 = std::max(whole.i0, window_i0_);
    whole.i1 = std::min(whole.i1, window_i1_);
    if (whole.empty())
      return;
    const long plane = whole.nj() * whole.nk();
    const long rows = std::max(1L, kSlabPoints / plane);
    for (long i = whole.i0; i < whole.i1; i += rows) {
      Region slab = whole;
      slab.i0 = i;
      slab.i1 = std::min(whole.i1, i + rows);
      execute(stage.body, slab, nullptr);
    }
  }

private:
  std::vector<double> acquire(std::size_t n) {
    if (pool_.empty())
      return std::vector<double>(n);
    std::vector<double> v = std::move(pool_.back());
    pool_.pop_back();
    if (v.size() < n)
      v.resize(n);
    return v;
  }

  void release(Array &a) {
    if (!a.uniform && a.data.capacity() > 0)
      pool_.push_back(std::move(a.data));
    a.data = {};
  }

  template <typename F> void map_in_place(Array &a, F f) {
    if (a.uniform) {
      a.c = f(a.c);
      return;
    }
    double *p = a.data.data();
    for (std::size_t q = 0; q < a.n; ++q)
      p[q] = f(p[q]);
  }

  /// a = f(a, b) elementwise with broadcasting; b is consumed.
  template <typename F> void zip_in_place(Array &a, Array &b, F f) {
    if (a.uniform && b.uniform) {
      a.c = f(a.c, b.c);
    } else if (a.uniform) {
      const double x = a.c;
      double *pb = b.data.data();
      for (std::size_t q = 0; q < b.n; ++q)
        pb[q] = f(x, pb[q]);
      std::swap(a, b);
    } else if (b.uniform) {
      const double y = b.c;
      double *pa = a.data.data();
      for (std::size_t q = 0; q < a.n; ++q)
        pa[q] = f(pa[q], y);
    } else {
      double *pa = a.data.data();
      const double *pb = b.data.data();
      const std::size_t n = a.n;
      for (std::size_t q = 0; q < n; ++q)
        pa[q] = f(pa[q], pb[q]);
    }
    release(b);
  }

  template <typename T>
  static void copy_rows(double *dst, const T *src, long nj, long nk, long sj, long sk) {
    if (nk == 1) {
      for (long j = 0; j < nj; ++j)
        dst[j] = static_cast<double>(src[j * sj]);
      return;
    }
    for (long j = 0; j < nj; ++j, dst += nk) {
      const T *col = src + j * sj;
      if constexpr (std::is_same_v<T, double>) {
        if (sk == 1) {
          std::memcpy(dst, col, static_cast<std::size_t>(nk) * sizeof(double));
          continue;
        }
      }
      for (long k = 0; k < nk; ++k)
        dst[k] = static_cast<double>(col[k * sk]);
    }
  }

  Array gather(const Node &n, const Region &r) {
    const View &v = ctx_.views[static_cast<std::size_t>(n.slot)];
    Array out;
    out.uniform = false;
    out.n = static_cast<std::size_t>(r.size());
    out.data = acquire(out.n);
    double *dst = out.data.data();
    const long nj = r.nj();
    const long nk = r.nk();
    for (long i = r.i0; i < r.i1; ++i, dst += nj * nk) {
      const long base = v.index(i + n.offset[0], r.j0 + n.offset[1], r.k0 + n.offset[2]);
      if (v.dtype == DType::f64)
        copy_rows(dst, reinterpret_cast<const double *>(v.origin) + base, nj, nk, v.sj, v.sk);
      else
        copy_rows(dst, reinterpret_cast<const float *>(v.origin) + base, nj, nk, v.sj, v.sk);
    }
    return out;
  }

  Array eval(const Node &n, const Region &r) {
    switch (n.kind) {
    case Expr::Kind::field_access:
      return gather(n, r);
    case Expr::Kind::scalar_ref:
      return uniform(ctx_.scalars[static_cast<std::size_t>(n.slot)]);
    case Expr::Kind::literal:
      return uniform(n.value);
    case Expr::Kind::unary: {
      Array a = eval(n.args[0], r);
      UnaryOp op = n.unary_op;
      map_in_place(a, [op](double x) { return detail::apply_unary(op, x); });
      return a;
    }
    case Expr::Kind::binary: {
      Array a = eval(n.args[0], r);
      Array b = eval(n.args[1], r);
      switch (n.binary_op) {
      case BinaryOp::add: zip_in_place(a, b, [](double x, double y) { return x + y; }); break;
      case BinaryOp::sub: zip_in_place(a, b, [](double x, double y) { return x - y; }); break;
      case BinaryOp::mul: zip_in_place(a, b, [](double x, double y) { return x * y; }); break;
      case BinaryOp::div: zip_in_place(a, b, [](double x, double y) { return x / y; }); break;
      default: {
        BinaryOp op = n.binary_op;
        zip_in_place(a, b, [op](double x, double y) { return detail::apply_binary(op, x, y); });
      }
      }
      return a;
    }
    case Expr::Kind::builtin_call: {
      Builtin fn = n.builtin;
      Array a = eval(n.args[0], r);
      if (n.args.size() == 1) {
        map_in_place(a, [fn](double x) {
          double args[2] = {x, 0.0};
          return detail::apply_builtin(fn, args);
        });
        return a;
      }
      Array b = eval(n.args[1], r);
      zip_in_place(a, b, [fn](double x, double y) {
        double args[2] = {x, y};
        return detail::apply_builtin(fn, args);
      });
      return a;
    }
    case Expr::Kind::name:
    case Expr::Kind::call:
      break;
    }
    return {};
  }

  void execute(const Statement &s, const Region &r, const std::vector<char> *mask) {
    Array value = eval(s.value, r);
    if (s.is_if) {
      const std::size_t n = static_cast<std::size_t>(r.size());
      std::vector<char> then_mask(n), else_mask(n);
      for (std::size_t q = 0; q < n; ++q) {
        bool active = !mask || (*mask)[q];
        bool cond = value.at(q) != 0.0;
        then_mask[q] = active && cond;
        else_mask[q] = active && !cond;
      }
      release(value);
      for (const auto &t : s.then_body)
        execute(t, r, &then_mask);
      for (const auto &t : s.else_body)
        execute(t, r, &else_mask);
      return;
    }
    commit(s, r, value, mask);
    release(value);
  }

  /// Writes one i row of `value` (points q0 onwards) to columns [jlo, jhi)
  /// of `dst`, which addresses column r.j0 at level r.k0.
  template <typename T>
  static void store_row(T *dst, const View &v, const Region &r, long jlo, long jhi,
                        const Array &value, std::size_t q0, const std::vector<char> *mask) {
    const long nk = r.nk();
    for (long j = jlo; j < jhi; ++j) {
      T *col = dst + (j - r.j0) * v.sj;
      const std::size_t q = q0 + static_cast<std::size_t>((j - r.j0) * nk);
      if (!mask && !value.uniform && std::is_same_v<T, double> && v.sk == 1 && nk > 1) {
        std::copy_n(value.data.data() + q, nk, col);
        continue;
      }
      for (long k = 0; k < nk; ++k) {
        const std::size_t p = q + static_cast<std::size_t>(k);
        if (mask && !(*mask)[p])
          continue;
        col[k * v.sk] = static_cast<T>(value.uniform ? value.c : value.data[p]);
      }
    }
  }

  void commit(const Statement &s, const Region &r, const Array &value,
              const std::vector<char> *mask) const {
    const View &v = ctx_.views[static_cast<std::size_t>(s.target)];
    const std::size_t row = static_cast<std::size_t>(r.nj() * r.nk());
    long jlo = r.j0, jhi = r.j1;
    if (s.target_is_api) {
      jlo = std::max(jlo, 0L);
      jhi = std::min(jhi, ctx_.domain[1]);
    }
    std::size_t q0 = 0;
    for (long i = r.i0; i < r.i1; ++i, q0 += row) {
      if (s.target_is_api && (i < 0 || i >= ctx_.domain[0]))
        continue;
      const long base = v.index(i, r.j0, r.k0);
      if (v.dtype == DType::f64)
        store_row(reinterpret_cast<double *>(v.origin) + base, v, r, jlo, jhi, value, q0, mask);
      else
        store_row(reinterpret_cast<float *>(v.origin) + base, v, r, jlo, jhi, value, q0, mask);
    }
  }

  const ExecutionContext &ctx_;
  std::vector<std::vector<double>> pool_;
  long window_i0_ = std::numeric_limits<long>::min();
  long window_i1_ = std::numeric_limits<long>::max();
};

} // namespace

void run_vec(const StencilImplementation &impl, const CallArguments &args) {
  ExecutionContext ctx(impl, args);
  if (ctx.domain[0] <= 0 || ctx.domain[1] <= 0 || ctx.domain[2] <= 0)
    return;
  BulkEngine engine(ctx);
  auto run = [&](const PreparedStage &stage, long k0, long k1) {
    engine.run_stage(stage, k0, k1);
  };
  for (const auto &ms : ctx.multistages) {
    if (ms.order == IterationOrder::parallel || !detail::columns_independent(ms)) {
      detail::drive_multistage(ms, run);
      continue;
    }
    const long rows = std::max(1L, kColumnSlabPoints / ctx.domain[1]);
    for (long i = 0; i < ctx.domain[0]; i += rows) {
      engine.set_window(i, std::min(ctx.domain[0], i + rows));
      detail::drive_multistage(ms, run);
    }
    engine.set_window(std::numeric_limits<long>::min(), std::numeric_limits<long>::max());
  }
}

} // namespace gts
