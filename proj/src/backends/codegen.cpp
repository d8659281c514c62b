#include "gts/gen.hpp"

#include <cstdlib>
#include <map>
#include <optional>
#include <set>
#include <sstream>

namespace gts {

GenOptions GenOptions::from_environment() {
  GenOptions options;
  const char *fault = std::getenv("GTS_GEN_FAULT");
  options.inject_fault = fault && std::string_view(fault) == "1";
  return options;
}

std::string GenOptions::config_string() const {
  return std::string("gen-v3;fault=") + (inject_fault ? "1" : "0");
}

std::string entry_symbol(const StencilImplementation &impl, const Fingerprint &fp) {
  return "gts_run_" + impl.name + "_" + fp.short_hex();
}

std::string trampoline_symbol(const StencilImplementation &impl, const Fingerprint &fp) {
  return "gts_call_" + impl.name + "_" + fp.short_hex();
}

namespace {

constexpr std::string_view kPrelude = R"(#include <math.h>
#include <stdlib.h>
#include <string.h>
#include <sys/mman.h>

namespace {

inline double gts_min(double a, double b) { return b < a ? b : a; }
inline double gts_max(double a, double b) { return a < b ? b : a; }
inline double gts_truth(bool b) { return b ? 1.0 : 0.0; }
inline long gts_clamp(long v, long lo, long hi) { return v < lo ? lo : (v > hi ? hi : v); }

)";

std::string ctype(DType dtype) { return dtype == DType::f32 ? "float" : "double"; }

std::string bound_expr(const AxisBound &b) {
  if (b.level == LevelMarker::start)
    return std::to_string(b.offset) + "L";
  if (b.offset == 0)
    return "nk";
  return "(nk + (" + std::to_string(b.offset) + "L))";
}

std::string literal(double v) {
  std::string text = format_number(v);
  if (text == "nan")
    return "__builtin_nan(\"\")";
  if (text == "inf")
    return "__builtin_inf()";
  if (text == "-inf")
    return "(-__builtin_inf())";
  return v < 0 ? "(" + text + ")" : text;
}

class Emitter {
public:
  Emitter(const StencilImplementation &impl, const Fingerprint &fp, const GenOptions &options)
      : impl_(impl), fp_(fp), options_(options) {
    for (std::size_t f = 0; f < impl.api_fields.size(); ++f)
      fields_[impl.api_fields[f].name] = {"f" + std::to_string(f), impl.api_fields[f].dtype, true};
    for (std::size_t t = 0; t < impl.temporaries.size(); ++t)
      fields_[impl.temporaries[t].name] = {"t" + std::to_string(t), impl.temporaries[t].dtype,
                                           false};
    for (std::size_t s = 0; s < impl.api_scalars.size(); ++s)
      scalars_[impl.api_scalars[s].name] = "s" + std::to_string(s);
    find_faulty_stage();
    find_column_groups();
    place_temporaries();
  }

  std::string emit() {
    out_ << "// Generated by stencil-forge. Do not edit.\n";
    out_ << "// stencil " << impl_.name << "\n";
    out_ << "// fingerprint " << fp_.hex() << "\n";
    out_ << kPrelude;
    emit_kernel();
    out_ << "} // namespace\n\n";
    emit_entry();
    emit_trampoline();
    return out_.str();
  }

private:
  struct FieldInfo {
    std::string id;
    DType dtype;
    bool api;
  };

  void line(int indent, const std::string &text) {
    out_ << std::string(static_cast<std::size_t>(indent) * 2, ' ') << text << "\n";
  }

  void find_faulty_stage() {
    if (!options_.inject_fault)
      return;
    for (std::size_t m = 0; m < impl_.multistages.size(); ++m)
      for (std::size_t s = 0; s < impl_.multistages[m].stages.size(); ++s) {
        bool writes_api = false;
        visit_assignments(impl_.multistages[m].stages[s].body, [&](const Stmt &a) {
          writes_api = writes_api || fields_.at(a.target.name).api;
        });
        if (writes_api)
          faulty_ = {m, s};
      }
  }

  /// True when every stage of multistages [first, last) has a zero compute
  /// extent and no field written there is read at a horizontal offset. Each
  /// column is then computed from its own data only.
  bool columns_independent(std::size_t first, std::size_t last) const {
    std::set<std::string> written;
    for (std::size_t m = first; m < last; ++m)
      for (const auto &stage : impl_.multistages[m].stages) {
        if (stage.compute_extent != Extent{})
          return false;
        visit_assignments(stage.body, [&](const Stmt &a) { written.insert(a.target.name); });
      }
    bool shifted = false;
    for (std::size_t m = first; m < last; ++m)
      for (const auto &stage : impl_.multistages[m].stages)
        visit_exprs(stage.body, [&](const Expr &e) {
          shifted = shifted || (e.kind == Expr::Kind::field_access &&
                                (e.offset[0] != 0 || e.offset[1] != 0) && written.count(e.name));
        });
    return !shifted;
  }

  /// Maximal runs of consecutive column-independent multistages. A run is
  /// executed tile by tile over j, all of its multistages per tile.
  void find_column_groups() {
    group_of_.assign(impl_.multistages.size(), std::nullopt);
    std::size_t m = 0;
    while (m < impl_.multistages.size()) {
      if (!columns_independent(m, m + 1)) {
        ++m;
        continue;
      }
      std::size_t end = m + 1;
      while (end < impl_.multistages.size() && columns_independent(m, end + 1))
        ++end;
      for (std::size_t q = m; q < end; ++q)
        group_of_[q] = groups_.size();
      groups_.push_back({m, end});
      m = end;
    }
  }

  /// Temporaries used only inside one column group live in a per-thread tile
  /// buffer. Outside groups, a temporary touched by a single PARALLEL
  /// multistage and only read at dk = 0 lives in one plane per thread. Both
  /// are cleared before reuse. All others go to the per-call arena.
  void place_temporaries() {
    plane_of_.assign(impl_.temporaries.size(), std::nullopt);
    tile_of_.assign(impl_.temporaries.size(), std::nullopt);
    std::map<std::string, std::size_t> index;
    for (std::size_t t = 0; t < impl_.temporaries.size(); ++t)
      index[impl_.temporaries[t].name] = t;
    std::vector<std::set<std::size_t>> users(impl_.temporaries.size());
    std::vector<bool> vertical(impl_.temporaries.size(), false);
    for (std::size_t m = 0; m < impl_.multistages.size(); ++m)
      for (const auto &stage : impl_.multistages[m].stages) {
        visit_assignments(stage.body, [&](const Stmt &a) {
          auto it = index.find(a.target.name);
          if (it != index.end())
            users[it->second].insert(m);
        });
        visit_exprs(stage.body, [&](const Expr &e) {
          if (e.kind != Expr::Kind::field_access)
            return;
          auto it = index.find(e.name);
          if (it == index.end())
            return;
          users[it->second].insert(m);
          vertical[it->second] = vertical[it->second] || e.offset[2] != 0;
        });
      }
    for (std::size_t t = 0; t < impl_.temporaries.size(); ++t) {
      if (users[t].empty())
        continue;
      const std::size_t m = *users[t].begin();
      if (group_of_[m]) {
        bool same = true;
        for (std::size_t u : users[t])
          same = same && group_of_[u] == group_of_[m];
        if (same)
          tile_of_[t] = group_of_[m];
        continue;
      }
      if (users[t].size() == 1 && !vertical[t] &&
          impl_.multistages[m].order == IterationOrder::parallel)
        plane_of_[t] = m;
    }
  }

  std::string access(const std::string &name, const Offset3 &o) const {
    const FieldInfo &f = fields_.at(name);
    auto term = [](const char *axis, int off) {
      return off == 0 ? std::string(axis)
                      : "(" + std::string(axis) + (off > 0 ? " + " : " - ") +
                            std::to_string(off > 0 ? off : -off) + ")";
    };
    const char *j = tiled_.count(name) ? "(j - jb)" : "j";
    return f.id + "[" + term("i", o[0]) + " * " + f.id + "_si + " + term(j, o[1]) + " * " +
           f.id + "_sj + " + term("k", o[2]) + " * " + f.id + "_sk]";
  }

  std::string expr(const Expr &e) const {
    switch (e.kind) {
    case Expr::Kind::field_access: {
      auto pre = preloaded_.find({e.name, e.offset});
      std::string load = pre != preloaded_.end() ? pre->second : access(e.name, e.offset);
      return fields_.at(e.name).dtype == DType::f32 ? "(double)" + load : load;
    }
    case Expr::Kind::scalar_ref:
      return scalars_.at(e.name);
    case Expr::Kind::literal:
      return literal(e.value);
    case Expr::Kind::unary:
      switch (e.unary_op) {
      case UnaryOp::neg: return "(-" + expr(e.args[0]) + ")";
      case UnaryOp::pos: return expr(e.args[0]);
      case UnaryOp::logical_not: return "gts_truth(" + expr(e.args[0]) + " == 0.0)";
      }
      break;
    case Expr::Kind::binary: {
      std::string a = expr(e.args[0]);
      std::string b = expr(e.args[1]);
      switch (e.binary_op) {
      case BinaryOp::add: return "(" + a + " + " + b + ")";
      case BinaryOp::sub: return "(" + a + " - " + b + ")";
      case BinaryOp::mul: return "(" + a + " * " + b + ")";
      case BinaryOp::div: return "(" + a + " / " + b + ")";
      case BinaryOp::pow: return "pow(" + a + ", " + b + ")";
      case BinaryOp::lt: return "gts_truth(" + a + " < " + b + ")";
      case BinaryOp::le: return "gts_truth(" + a + " <= " + b + ")";
      case BinaryOp::gt: return "gts_truth(" + a + " > " + b + ")";
      case BinaryOp::ge: return "gts_truth(" + a + " >= " + b + ")";
      case BinaryOp::eq: return "gts_truth(" + a + " == " + b + ")";
      case BinaryOp::ne: return "gts_truth(" + a + " != " + b + ")";
      case BinaryOp::logical_and: return "gts_truth((" + a + " != 0.0) & (" + b + " != 0.0))";
      case BinaryOp::logical_or: return "gts_truth((" + a + " != 0.0) | (" + b + " != 0.0))";
      }
      break;
    }
    case Expr::Kind::builtin_call: {
      static const std::map<Builtin, std::string> names = {
          {Builtin::abs, "fabs"},   {Builtin::min, "gts_min"}, {Builtin::max, "gts_max"},
          {Builtin::sqrt, "sqrt"},  {Builtin::exp, "exp"},     {Builtin::log, "log"},
          {Builtin::pow, "pow"},    {Builtin::floor, "floor"}, {Builtin::ceil, "ceil"}};
      std::string call = names.at(e.builtin) + "(";
      for (std::size_t a = 0; a < e.args.size(); ++a)
        call += (a ? ", " : "") + expr(e.args[a]);
      return call + ")";
    }
    case Expr::Kind::name:
    case Expr::Kind::call:
      throw Error(ErrorCode::UnboundExternal, "unresolved name '" + e.name + "' in code generation");
    }
    return "0.0";
  }

  void stmt(const Stmt &s, int indent, bool guard_api) {
    if (s.kind == Stmt::Kind::if_else) {
      line(indent, "if (" + expr(s.value) + " != 0.0) {");
      for (const auto &t : s.then_body)
        stmt(t, indent + 1, guard_api);
      if (!s.else_body.empty()) {
        line(indent, "} else {");
        for (const auto &t : s.else_body)
          stmt(t, indent + 1, guard_api);
      }
      line(indent, "}");
      return;
    }
    const FieldInfo &f = fields_.at(s.target.name);
    std::string value = expr(s.value);
    if (f.dtype == DType::f32)
      value = "(float)(" + value + ")";
    std::string assign = access(s.target.name, {0, 0, 0}) + " = " + value + ";";
    if (guard_api && f.api)
      line(indent, "if (i >= 0 && i < ni && j >= 0 && j < nj) " + assign);
    else
      line(indent, assign);
  }

  void stage_loops(const Stage &stage, std::size_t m, std::size_t s, int indent,
                   bool omp_for) {
    const Extent &e = stage.compute_extent;
    long i_hi = e.hi[0];
    if (faulty_ && faulty_->first == m && faulty_->second == s)
      i_hi -= 1;
    line(indent, "// stage " + std::to_string(s) + " extent " + to_string(e));
    if (omp_for)
      line(indent, "#pragma omp for schedule(static)");
    line(indent, "for (long j = " + std::to_string(e.lo[1]) + "L; j < nj + " +
                     std::to_string(e.hi[1]) + "L; ++j) {");
    line(indent + 1, "for (long i = " + std::to_string(e.lo[0]) + "L; i < ni + " +
                         std::to_string(i_hi) + "L; ++i) {");
    bool extended = e.lo[0] != 0 || e.lo[1] != 0 || e.hi[0] != 0 || e.hi[1] != 0;
    stmt(stage.body, indent + 2, extended);
    line(indent + 1, "}");
    line(indent, "}");
  }

  /// One horizontal loop running stages [first, last) point by point.
  void fused_loops(std::size_t m, std::size_t first, std::size_t last, int indent) {
    line(indent, "// stages " + std::to_string(first) + "-" + std::to_string(last - 1) +
                     " fused, zero extent");
    line(indent, "for (long j = jb; j < je; ++j) {");
    // Each iteration touches only its own column, so no dependence crosses i.
    line(indent + 1, "#pragma GCC ivdep");
    line(indent + 1, "for (long i = 0L; i < ni; ++i) {");
    // Off-level reads of fields written here see values from other levels,
    // which no stage of this level modifies; loading them up front lets the
    // compiler vectorize despite the stores in between.
    std::set<std::string> written;
    for (std::size_t s = first; s < last; ++s)
      visit_assignments(impl_.multistages[m].stages[s].body,
                        [&](const Stmt &a) { written.insert(a.target.name); });
    for (std::size_t s = first; s < last; ++s)
      visit_exprs(impl_.multistages[m].stages[s].body, [&](const Expr &e) {
        if (e.kind != Expr::Kind::field_access || e.offset[2] == 0 || !written.count(e.name) ||
            preloaded_.count({e.name, e.offset}))
          return;
        std::string local = "p" + std::to_string(preloaded_.size());
        line(indent + 2, "const " + ctype(fields_.at(e.name).dtype) + " " + local + " = " +
                             access(e.name, e.offset) + ";");
        preloaded_[{e.name, e.offset}] = local;
      });
    for (std::size_t s = first; s < last; ++s) {
      if (faulty_ && faulty_->first == m && faulty_->second == s) {
        line(indent + 2, "if (i < ni - 1) {");
        stmt(impl_.multistages[m].stages[s].body, indent + 3, false);
        line(indent + 2, "}");
      } else {
        stmt(impl_.multistages[m].stages[s].body, indent + 2, false);
      }
    }
    preloaded_.clear();
    line(indent + 1, "}");
    line(indent, "}");
  }

  /// Thread-private planes for `temps`, declared inside a parallel region.
  void emit_planes(const std::vector<std::size_t> &temps) {
    line(2, "size_t gts_plane_bytes = 0;");
    for (std::size_t t : temps) {
      const TempDecl &decl = impl_.temporaries[t];
      std::string id = "t" + std::to_string(t);
      const Extent &e = decl.extent;
      line(2, "const long " + id + "_ni = ni + " + std::to_string(e.hi[0] - e.lo[0]) + "L;");
      line(2, "const long " + id + "_nj = nj + " + std::to_string(e.hi[1] - e.lo[1]) + "L;");
      line(2, "const long " + id + "_si = 1;");
      line(2, "const long " + id + "_sj = " + id + "_ni;");
      line(2, "const long " + id + "_sk = 0;");
      line(2, "const size_t " + id + "_at = gts_plane_bytes;");
      line(2, "gts_plane_bytes += ((size_t)(" + id + "_ni * " + id + "_nj) * sizeof(" +
                  ctype(decl.dtype) + ") + 63) / 64 * 64;");
    }
    line(2, "char *gts_plane = (char *)malloc(gts_plane_bytes);");
    line(2, "if (!gts_plane)");
    line(3, "abort();");
    for (std::size_t t : temps) {
      const TempDecl &decl = impl_.temporaries[t];
      std::string id = "t" + std::to_string(t);
      std::string ty = ctype(decl.dtype);
      const Extent &e = decl.extent;
      line(2, ty + " *__restrict const " + id + " = (" + ty + " *)(gts_plane + " + id +
                  "_at) + " + std::to_string(-e.lo[0]) + "L + " + std::to_string(-e.lo[1]) +
                  "L * " + id + "_sj;");
    }
  }

  void emit_kernel() {
    std::ostringstream sig;
    sig << "long ni, long nj, long nk";
    for (std::size_t f = 0; f < impl_.api_fields.size(); ++f) {
      std::string id = "f" + std::to_string(f);
      sig << ",\n    " << ctype(impl_.api_fields[f].dtype) << " *" << id << "_base, long "
          << id << "_si_in, long " << id << "_sj, long " << id << "_sk, long " << id
          << "_oi, long " << id << "_oj, long " << id << "_ok";
    }
    for (std::size_t s = 0; s < impl_.api_scalars.size(); ++s)
      sig << ",\n    " << ctype(impl_.api_scalars[s].dtype) << " s" << s << "_in";
    sig << ",\n    int nt";
    kernel_signature_ = sig.str();

    line(0, "template <bool UnitI>");
    line(0, "void gts_kernel(" + kernel_signature_ + ") {");
    line(1, "if (ni <= 0 || nj <= 0 || nk <= 0)");
    line(2, "return;");
    line(1, "if (nt < 1)");
    line(2, "nt = 1;");
    for (std::size_t f = 0; f < impl_.api_fields.size(); ++f) {
      std::string id = "f" + std::to_string(f);
      std::string t = ctype(impl_.api_fields[f].dtype);
      line(1, "const long " + id + "_si = UnitI ? 1L : " + id + "_si_in;");
      line(1, t + " *__restrict const " + id + " = " + id + "_base + " + id + "_oi * " + id +
                  "_si + " + id + "_oj * " + id + "_sj + " + id + "_ok * " + id + "_sk;");
    }
    for (std::size_t s = 0; s < impl_.api_scalars.size(); ++s)
      line(1, "const double s" + std::to_string(s) + " = (double)s" + std::to_string(s) +
                  "_in;");
    emit_arena();
    for (std::size_t m = 0; m < impl_.multistages.size();) {
      if (group_of_[m]) {
        emit_group(*group_of_[m]);
        m = groups_[*group_of_[m]].second;
      } else {
        emit_multistage(m++);
      }
    }
    if (has_arena())
      line(1, "munmap(gts_map, gts_offset);");
    line(0, "}");
    out_ << "\n";
  }

  bool in_arena(std::size_t t) const { return !plane_of_[t] && !tile_of_[t]; }

  bool has_arena() const {
    for (std::size_t t = 0; t < impl_.temporaries.size(); ++t)
      if (in_arena(t))
        return true;
    return false;
  }

  void emit_arena() {
    if (!has_arena())
      return;
    line(1, "size_t gts_offset = 0;");
    for (std::size_t t = 0; t < impl_.temporaries.size(); ++t) {
      if (!in_arena(t))
        continue;
      const TempDecl &decl = impl_.temporaries[t];
      std::string id = "t" + std::to_string(t);
      const Extent &e = decl.extent;
      line(1, "const long " + id + "_ni = ni + " + std::to_string(e.hi[0] - e.lo[0]) + "L;");
      line(1, "const long " + id + "_nj = nj + " + std::to_string(e.hi[1] - e.lo[1]) + "L;");
      line(1, "const long " + id + "_nk = nk + " + std::to_string(e.hi[2] - e.lo[2]) + "L;");
      line(1, "const long " + id + "_si = 1;");
      line(1, "const long " + id + "_sj = " + id + "_ni;");
      line(1, "const long " + id + "_sk = " + id + "_ni * " + id + "_nj;");
      line(1, "const size_t " + id + "_at = gts_offset;");
      line(1, "gts_offset += ((size_t)(" + id + "_ni * " + id + "_nj * " + id + "_nk) * sizeof(" +
                  ctype(decl.dtype) + ") + 63) / 64 * 64;");
    }
    // Fresh anonymous pages arrive zeroed; huge pages keep the fault count low.
    line(1, "void *const gts_map = mmap(NULL, gts_offset, PROT_READ | PROT_WRITE, "
            "MAP_PRIVATE | MAP_ANONYMOUS, -1, 0);");
    line(1, "if (gts_map == MAP_FAILED)");
    line(2, "abort();");
    line(0, "#ifdef MADV_HUGEPAGE");
    line(1, "madvise(gts_map, gts_offset, MADV_HUGEPAGE);");
    line(0, "#endif");
    line(1, "char *const gts_arena = (char *)gts_map;");
    for (std::size_t t = 0; t < impl_.temporaries.size(); ++t) {
      if (!in_arena(t))
        continue;
      const TempDecl &decl = impl_.temporaries[t];
      std::string id = "t" + std::to_string(t);
      std::string ty = ctype(decl.dtype);
      const Extent &e = decl.extent;
      line(1, ty + " *__restrict const " + id + " = (" + ty + " *)(gts_arena + " + id +
                  "_at) + " + std::to_string(-e.lo[0]) + "L + " + std::to_string(-e.lo[1]) +
                  "L * " + id + "_sj + " + std::to_string(-e.lo[2]) + "L * " + id + "_sk;");
    }
  }

  void emit_multistage(std::size_t m) {
    const MultiStage &ms = impl_.multistages[m];
    line(1, "// multistage " + std::to_string(m) + " " + std::string(to_string(ms.order)));
    if (ms.order == IterationOrder::parallel) {
      std::vector<std::size_t> planes;
      for (std::size_t t = 0; t < plane_of_.size(); ++t)
        if (plane_of_[t] == m)
          planes.push_back(t);
      int depth = 1;
      if (!planes.empty()) {
        line(1, "#pragma omp parallel num_threads(nt) if(nt > 1)");
        line(1, "{");
        emit_planes(planes);
        line(2, "#pragma omp for schedule(static)");
        depth = 2;
      } else {
        line(1, "#pragma omp parallel for schedule(static) num_threads(nt) if(nt > 1)");
      }
      line(depth, "for (long k = 0; k < nk; ++k) {");
      if (!planes.empty())
        line(depth + 1, "memset(gts_plane, 0, gts_plane_bytes);");
      for (std::size_t s = 0; s < ms.stages.size(); ++s) {
        const Stage &stage = ms.stages[s];
        line(depth + 1, "if (k >= " + bound_expr(stage.interval.start) + " && k < " +
                            bound_expr(stage.interval.end) + ") {");
        stage_loops(stage, m, s, depth + 2, false);
        line(depth + 1, "}");
      }
      line(depth, "}");
      if (!planes.empty()) {
        line(2, "free(gts_plane);");
        line(1, "}");
      }
      return;
    }
    line(1, "#pragma omp parallel num_threads(nt) if(nt > 1)");
    line(1, "{");
    std::size_t first = 0;
    while (first < ms.stages.size()) {
      std::size_t last = first;
      while (last < ms.stages.size() && ms.stages[last].block == ms.stages[first].block)
        ++last;
      const Interval &iv = ms.stages[first].interval;
      line(2, "{");
      line(3, "const long kb = gts_clamp(" + bound_expr(iv.start) + ", 0L, nk);");
      line(3, "const long ke = gts_clamp(" + bound_expr(iv.end) + ", 0L, nk);");
      if (ms.order == IterationOrder::forward)
        line(3, "for (long k = kb; k < ke; ++k) {");
      else
        line(3, "for (long k = ke - 1; k >= kb; --k) {");
      for (std::size_t s = first; s < last; ++s)
        stage_loops(ms.stages[s], m, s, 4, true);
      line(3, "}");
      line(2, "}");
      first = last;
    }
    line(1, "}");
  }

  /// Runs multistages of group `g` tile by tile over j. The tile height keeps
  /// the columns of one tile, over all levels, near 1 MiB.
  void emit_group(std::size_t g) {
    const auto [first, last] = groups_[g];
    std::set<std::string> touched;
    for (std::size_t m = first; m < last; ++m)
      for (const auto &stage : impl_.multistages[m].stages) {
        visit_assignments(stage.body, [&](const Stmt &a) { touched.insert(a.target.name); });
        visit_exprs(stage.body, [&](const Expr &e) {
          if (e.kind == Expr::Kind::field_access)
            touched.insert(e.name);
        });
      }
    std::size_t column_bytes = 0;
    for (const auto &name : touched)
      column_bytes += size_of(fields_.at(name).dtype);
    std::vector<std::size_t> tiles;
    for (std::size_t t = 0; t < tile_of_.size(); ++t)
      if (tile_of_[t] == g) {
        tiles.push_back(t);
        tiled_.insert(impl_.temporaries[t].name);
      }

    line(1, "// multistages " + std::to_string(first) + "-" + std::to_string(last - 1) +
                " column tiled");
    line(1, "#pragma omp parallel num_threads(nt) if(nt > 1)");
    line(1, "{");
    line(2, "const long jt = gts_clamp((1L << 20) / (ni * nk * " + std::to_string(column_bytes) +
                "L), 1L, nj);");
    if (!tiles.empty())
      emit_tiles(tiles);
    line(2, "#pragma omp for schedule(static)");
    line(2, "for (long jb = 0; jb < nj; jb += jt) {");
    line(3, "const long je = jb + jt < nj ? jb + jt : nj;");
    if (!tiles.empty())
      line(3, "memset(gts_tile, 0, gts_tile_bytes);");
    for (std::size_t m = first; m < last; ++m)
      tiled_multistage(m, 3);
    line(2, "}");
    if (!tiles.empty())
      line(2, "free(gts_tile);");
    line(1, "}");
    tiled_.clear();
  }

  void tiled_multistage(std::size_t m, int indent) {
    const MultiStage &ms = impl_.multistages[m];
    line(indent, "// multistage " + std::to_string(m) + " " + std::string(to_string(ms.order)));
    if (ms.order == IterationOrder::parallel) {
      line(indent, "for (long k = 0; k < nk; ++k) {");
      for (std::size_t s = 0; s < ms.stages.size(); ++s) {
        const Stage &stage = ms.stages[s];
        line(indent + 1, "if (k >= " + bound_expr(stage.interval.start) + " && k < " +
                             bound_expr(stage.interval.end) + ") {");
        fused_loops(m, s, s + 1, indent + 2);
        line(indent + 1, "}");
      }
      line(indent, "}");
      return;
    }
    std::size_t first = 0;
    while (first < ms.stages.size()) {
      std::size_t last = first;
      while (last < ms.stages.size() && ms.stages[last].block == ms.stages[first].block)
        ++last;
      const Interval &iv = ms.stages[first].interval;
      line(indent, "{");
      line(indent + 1, "const long kb = gts_clamp(" + bound_expr(iv.start) + ", 0L, nk);");
      line(indent + 1, "const long ke = gts_clamp(" + bound_expr(iv.end) + ", 0L, nk);");
      if (ms.order == IterationOrder::forward)
        line(indent + 1, "for (long k = kb; k < ke; ++k) {");
      else
        line(indent + 1, "for (long k = ke - 1; k >= kb; --k) {");
      fused_loops(m, first, last, indent + 2);
      line(indent + 1, "}");
      line(indent, "}");
      first = last;
    }
  }

  /// Thread-private tile buffers for `temps`, `jt` rows of j each.
  void emit_tiles(const std::vector<std::size_t> &temps) {
    line(2, "size_t gts_tile_bytes = 0;");
    for (std::size_t t : temps) {
      const TempDecl &decl = impl_.temporaries[t];
      std::string id = "t" + std::to_string(t);
      const Extent &e = decl.extent;
      line(2, "const long " + id + "_ni = ni + " + std::to_string(e.hi[0] - e.lo[0]) + "L;");
      line(2, "const long " + id + "_nj = jt + " + std::to_string(e.hi[1] - e.lo[1]) + "L;");
      line(2, "const long " + id + "_nk = nk + " + std::to_string(e.hi[2] - e.lo[2]) + "L;");
      line(2, "const long " + id + "_si = 1;");
      line(2, "const long " + id + "_sj = " + id + "_ni;");
      line(2, "const long " + id + "_sk = " + id + "_ni * " + id + "_nj;");
      line(2, "const size_t " + id + "_at = gts_tile_bytes;");
      line(2, "gts_tile_bytes += ((size_t)(" + id + "_ni * " + id + "_nj * " + id +
                  "_nk) * sizeof(" + ctype(decl.dtype) + ") + 63) / 64 * 64;");
    }
    line(2, "char *gts_tile = (char *)malloc(gts_tile_bytes);");
    line(2, "if (!gts_tile)");
    line(3, "abort();");
    for (std::size_t t : temps) {
      const TempDecl &decl = impl_.temporaries[t];
      std::string id = "t" + std::to_string(t);
      std::string ty = ctype(decl.dtype);
      const Extent &e = decl.extent;
      line(2, ty + " *__restrict const " + id + " = (" + ty + " *)(gts_tile + " + id +
                  "_at) + " + std::to_string(-e.lo[0]) + "L + " + std::to_string(-e.lo[1]) +
                  "L * " + id + "_sj + " + std::to_string(-e.lo[2]) + "L * " + id + "_sk;");
    }
  }

  void emit_entry() {
    std::string name = entry_symbol(impl_, fp_);
    line(0, "extern \"C\" void " + name + "(" + kernel_signature_ + ") {");
    std::string unit = "true";
    std::string args = "ni, nj, nk";
    for (std::size_t f = 0; f < impl_.api_fields.size(); ++f) {
      std::string id = "f" + std::to_string(f);
      unit += " && " + id + "_si_in == 1";
      args += ", " + id + "_base, " + id + "_si_in, " + id + "_sj, " + id + "_sk, " + id +
              "_oi, " + id + "_oj, " + id + "_ok";
    }
    for (std::size_t s = 0; s < impl_.api_scalars.size(); ++s)
      args += ", s" + std::to_string(s) + "_in";
    args += ", nt";
    line(1, "if (" + unit + ")");
    line(2, "gts_kernel<true>(" + args + ");");
    line(1, "else");
    line(2, "gts_kernel<false>(" + args + ");");
    line(0, "}");
    out_ << "\n";
  }

  void emit_trampoline() {
    line(0, "extern \"C\" void " + trampoline_symbol(impl_, fp_) +
                "(const long *domain, void *const *fields, const long *field_ints, "
                "const double *scalars, int nt) {");
    std::string args = "domain[0], domain[1], domain[2]";
    for (std::size_t f = 0; f < impl_.api_fields.size(); ++f) {
      std::string n = std::to_string(f);
      args += ",\n      (" + ctype(impl_.api_fields[f].dtype) + " *)fields[" + n + "]";
      for (int q = 0; q < 6; ++q)
        args += ", field_ints[" + std::to_string(6 * f + static_cast<std::size_t>(q)) + "]";
    }
    for (std::size_t s = 0; s < impl_.api_scalars.size(); ++s)
      args += ",\n      (" + ctype(impl_.api_scalars[s].dtype) + ")scalars[" +
              std::to_string(s) + "]";
    args += ", nt";
    line(1, entry_symbol(impl_, fp_) + "(" + args + ");");
    line(0, "}");
  }

  const StencilImplementation &impl_;
  const Fingerprint &fp_;
  const GenOptions &options_;
  std::map<std::string, FieldInfo> fields_;
  std::map<std::string, std::string> scalars_;
  std::optional<std::pair<std::size_t, std::size_t>> faulty_;
  std::vector<std::optional<std::size_t>> plane_of_;
  std::vector<std::optional<std::size_t>> tile_of_;
  std::vector<std::optional<std::size_t>> group_of_;
  std::vector<std::pair<std::size_t, std::size_t>> groups_;
  std::set<std::string> tiled_;
  std::map<std::pair<std::string, Offset3>, std::string> preloaded_;
  std::string kernel_signature_;
  std::ostringstream out_;
};

} // namespace

std::string generate_source(const StencilImplementation &impl, const Fingerprint &fp,
                            const GenOptions &options) {
  return Emitter(impl, fp, options).emit();
}

} // namespace gts
