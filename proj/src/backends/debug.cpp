#include "exec_common.hpp"

namespace gts {

namespace {

using detail::ExecutionContext;
using detail::Node;
using detail::PreparedStage;
using detail::Region;
using detail::Statement;

class Interpreter {
public:
  explicit Interpreter(const ExecutionContext &ctx) : ctx_(ctx) {}

  void run_stage(const PreparedStage &stage, long k0, long k1) {
    Region r = ctx_.region(stage, k0, k1);
    if (r.empty())
      return;
    std::vector<char> mask(static_cast<std::size_t>(r.size()), 1);
    execute(stage.body, r, mask);
  }

private:
  double eval(const Node &n, long i, long j, long k) const {
    switch (n.kind) {
    case Expr::Kind::field_access:
      return ctx_.views[static_cast<std::size_t>(n.slot)].load(i + n.offset[0], j + n.offset[1],
                                                              k + n.offset[2]);
    case Expr::Kind::scalar_ref:
      return ctx_.scalars[static_cast<std::size_t>(n.slot)];
    case Expr::Kind::literal:
      return n.value;
    case Expr::Kind::unary:
      return detail::apply_unary(n.unary_op, eval(n.args[0], i, j, k));
    case Expr::Kind::binary: {
      double a = eval(n.args[0], i, j, k);
      double b = eval(n.args[1], i, j, k);
      return detail::apply_binary(n.binary_op, a, b);
    }
    case Expr::Kind::builtin_call: {
      double x[2] = {0.0, 0.0};
      for (std::size_t a = 0; a < n.args.size() && a < 2; ++a)
        x[a] = eval(n.args[a], i, j, k);
      return detail::apply_builtin(n.builtin, x);
    }
    case Expr::Kind::name:
    case Expr::Kind::call:
      break;
    }
    return 0.0;
  }

  /// Evaluates `s` at every masked point of `r` before committing any result.
  void execute(const Statement &s, const Region &r, const std::vector<char> &mask) {
    std::vector<double> values(mask.size());
    std::size_t p = 0;
    for (long i = r.i0; i < r.i1; ++i)
      for (long j = r.j0; j < r.j1; ++j)
        for (long k = r.k0; k < r.k1; ++k, ++p)
          if (mask[p])
            values[p] = eval(s.value, i, j, k);

    if (s.is_if) {
      std::vector<char> then_mask(mask.size()), else_mask(mask.size());
      for (std::size_t q = 0; q < mask.size(); ++q) {
        bool cond = values[q] != 0.0;
        then_mask[q] = mask[q] && cond;
        else_mask[q] = mask[q] && !cond;
      }
      for (const auto &t : s.then_body)
        execute(t, r, then_mask);
      for (const auto &t : s.else_body)
        execute(t, r, else_mask);
      return;
    }

    const auto &target = ctx_.views[static_cast<std::size_t>(s.target)];
    p = 0;
    for (long i = r.i0; i < r.i1; ++i)
      for (long j = r.j0; j < r.j1; ++j)
        for (long k = r.k0; k < r.k1; ++k, ++p)
          if (mask[p] && (!s.target_is_api || ctx_.in_domain(i, j)))
            target.store(i, j, k, values[p]);
  }

  const ExecutionContext &ctx_;
};

} // namespace

void run_debug(const StencilImplementation &impl, const CallArguments &args) {
  ExecutionContext ctx(impl, args);
  Interpreter interp(ctx);
  detail::drive(ctx, [&](const PreparedStage &stage, long k0, long k1) {
    interp.run_stage(stage, k0, k1);
  });
}

} // namespace gts
