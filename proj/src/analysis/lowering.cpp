#include "gts/analysis.hpp"

#include <algorithm>
#include <limits>
#include <set>

namespace gts {

// ---------------------------------------------------------------------------
// Intervals
// ---------------------------------------------------------------------------

namespace {

/// Empty for every sufficiently large K.
bool empty_for_large_k(const Interval &interval) { return !(interval.start < interval.end); }

/// Constraint on K for `a < b` where both bounds are symbolic.
struct KRange {
  long lo = std::numeric_limits<long>::min();
  long hi = std::numeric_limits<long>::max();
  bool never = false;
};

void restrict_strictly_less(const AxisBound &a, const AxisBound &b, KRange &range) {
  if (a.level == b.level) {
    if (!(a.offset < b.offset))
      range.never = true;
  } else if (a.level == LevelMarker::start) {
    // a.offset < K + b.offset
    range.lo = std::max(range.lo, static_cast<long>(a.offset) - b.offset + 1);
  } else {
    // K + a.offset < b.offset
    range.hi = std::min(range.hi, static_cast<long>(b.offset) - a.offset - 1);
  }
}

} // namespace

long minimum_k_size(const std::vector<Interval> &intervals) {
  long k_min = 1;
  for (const auto &iv : intervals) {
    for (const AxisBound *b : {&iv.start, &iv.end}) {
      if (b->level == LevelMarker::start)
        k_min = std::max(k_min, static_cast<long>(b->offset));
      else
        k_min = std::max(k_min, static_cast<long>(-b->offset));
    }
    if (iv.start.level == LevelMarker::start && iv.end.level == LevelMarker::end)
      k_min = std::max(k_min, static_cast<long>(iv.start.offset) - iv.end.offset);
  }
  return k_min;
}

bool intervals_may_overlap(const Interval &a, const Interval &b, long k_min) {
  KRange range;
  range.lo = k_min;
  restrict_strictly_less(a.start, a.end, range);
  restrict_strictly_less(b.start, b.end, range);
  restrict_strictly_less(a.start, b.end, range);
  restrict_strictly_less(b.start, a.end, range);
  return !range.never && range.lo <= range.hi;
}

NormalizedIntervals normalize_intervals(const StencilDefinition &def) {
  NormalizedIntervals result{def, 1, {}};
  auto &diags = result.diagnostics;
  std::vector<Interval> all;
  for (auto &comp : result.definition.computations)
    for (auto &block : comp.blocks) {
      if (!block.interval)
        block.interval = Interval::full();
      if (empty_for_large_k(*block.interval)) {
        diags.push_back({Severity::error, ErrorCode::EmptyInterval, block.span,
                         "interval " + to_string(*block.interval) +
                             " is empty for all sufficiently large domains"});
        continue;
      }
      all.push_back(*block.interval);
    }
  result.k_min = minimum_k_size(all);

  for (const auto &comp : result.definition.computations) {
    const auto &blocks = comp.blocks;
    for (std::size_t i = 0; i < blocks.size(); ++i)
      for (std::size_t j = 0; j < i; ++j)
        if (intervals_may_overlap(*blocks[j].interval, *blocks[i].interval, result.k_min))
          diags.push_back({Severity::error, ErrorCode::OverlappingIntervals, blocks[i].span,
                           "interval " + to_string(*blocks[i].interval) + " overlaps " +
                               to_string(*blocks[j].interval)});
    if (comp.order == IterationOrder::parallel)
      continue;
    for (std::size_t i = 1; i < blocks.size(); ++i) {
      const Interval &prev = *blocks[i - 1].interval;
      const Interval &cur = *blocks[i].interval;
      bool ascending = prev.start < cur.start;
      if (ascending != (comp.order == IterationOrder::forward))
        diags.push_back({Severity::error, ErrorCode::IntervalOrderMismatch, blocks[i].span,
                         std::string("intervals of a ") + std::string(to_string(comp.order)) +
                             " computation must be listed in " +
                             (comp.order == IterationOrder::forward ? "ascending"
                                                                     : "descending") +
                             " order"});
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Temporaries
// ---------------------------------------------------------------------------

namespace {

class TemporaryScanner {
public:
  TemporaryScanner(const StencilDefinition &def, TemporaryAnalysis &out) : def_(def), out_(out) {}

  void run() {
    for (const auto &comp : def_.computations)
      for (const auto &block : comp.blocks)
        for (const auto &stmt : block.body)
          collect(stmt);
    std::set<std::string> written;
    for (const auto &comp : def_.computations)
      for (const auto &block : comp.blocks)
        for (const auto &stmt : block.body)
          scan(stmt, written);
    infer_dtypes();
    for (const auto &temp : out_.temporaries)
      if (!read_.count(temp.name))
        out_.diagnostics.push_back({Severity::warning, ErrorCode::UnusedTemporary,
                                    first_write_[temp.name],
                                    "temporary '" + temp.name + "' is never read"});
  }

private:
  bool is_temp(const std::string &name) const { return temp_index_.count(name) > 0; }

  void collect(const Stmt &stmt) {
    visit_assignments(stmt, [&](const Stmt &s) {
      const std::string &name = s.target.name;
      if (def_.find_field(name) || def_.find_scalar(name) || is_temp(name))
        return;
      temp_index_[name] = out_.temporaries.size();
      first_write_[name] = s.target.span;
      out_.temporaries.push_back({name, DType::f64, Extent::zero()});
    });
  }

  void check_reads(const Expr &expr, const std::set<std::string> &written) {
    visit_exprs(expr, [&](const Expr &e) {
      if (e.kind != Expr::Kind::field_access || !is_temp(e.name))
        return;
      read_.insert(e.name);
      if (!written.count(e.name) && reported_.insert(e.name).second)
        out_.diagnostics.push_back({Severity::error, ErrorCode::UseBeforeDefine, e.span,
                                    "temporary '" + e.name + "' is read before it is written"});
    });
  }

  void scan(const Stmt &stmt, std::set<std::string> &written) {
    check_reads(stmt.value, written);
    if (stmt.kind == Stmt::Kind::assign) {
      written.insert(stmt.target.name);
      return;
    }
    std::set<std::string> then_written = written;
    for (const auto &s : stmt.then_body)
      scan(s, then_written);
    std::set<std::string> else_written = written;
    for (const auto &s : stmt.else_body)
      scan(s, else_written);
    written.insert(then_written.begin(), then_written.end());
    written.insert(else_written.begin(), else_written.end());
  }

  /// A temporary is f32 when every field and scalar contributing to its
  /// assigned values is f32 (and there is at least one).
  void infer_dtypes() {
    std::vector<bool> single(out_.temporaries.size(), true);
    std::vector<bool> has_source(out_.temporaries.size(), false);
    bool changed = true;
    while (changed) {
      changed = false;
      for (const auto &comp : def_.computations)
        for (const auto &block : comp.blocks)
          for (const auto &stmt : block.body)
            visit_assignments(stmt, [&](const Stmt &s) {
              auto it = temp_index_.find(s.target.name);
              if (it == temp_index_.end())
                return;
              std::size_t idx = it->second;
              bool ok = true;
              visit_exprs(s.value, [&](const Expr &e) {
                if (e.kind == Expr::Kind::field_access) {
                  has_source[idx] = true;
                  if (const auto *f = def_.find_field(e.name))
                    ok = ok && f->dtype == DType::f32;
                  else if (auto t = temp_index_.find(e.name); t != temp_index_.end())
                    ok = ok && single[t->second];
                } else if (e.kind == Expr::Kind::scalar_ref) {
                  has_source[idx] = true;
                  if (const auto *sc = def_.find_scalar(e.name))
                    ok = ok && sc->dtype == DType::f32;
                }
              });
              if (single[idx] && !ok) {
                single[idx] = false;
                changed = true;
              }
            });
    }
    for (std::size_t i = 0; i < out_.temporaries.size(); ++i)
      out_.temporaries[i].dtype = single[i] && has_source[i] ? DType::f32 : DType::f64;
  }

  const StencilDefinition &def_;
  TemporaryAnalysis &out_;
  std::map<std::string, std::size_t> temp_index_;
  std::map<std::string, SourceSpan> first_write_;
  std::set<std::string> read_;
  std::set<std::string> reported_;
};

} // namespace

TemporaryAnalysis detect_temporaries(const StencilDefinition &def) {
  TemporaryAnalysis out;
  TemporaryScanner(def, out).run();
  return out;
}

// ---------------------------------------------------------------------------
// Extents
// ---------------------------------------------------------------------------

namespace {

struct FlatStage {
  const Stmt *stmt;
  Interval interval;
};

std::vector<FlatStage> flatten(const StencilDefinition &def) {
  std::vector<FlatStage> out;
  for (const auto &comp : def.computations)
    for (const auto &block : comp.blocks)
      for (const auto &stmt : block.body)
        out.push_back({&stmt, block.interval.value_or(Interval::full())});
  return out;
}

/// Vertical reach, relative to [0, K), of reading at `dk` from every level of
/// `interval`, taken over all K >= k_min.
std::pair<long, long> vertical_reach(const Interval &interval, int dk, long k_min) {
  long lowest = interval.start.level == LevelMarker::start
                    ? interval.start.offset + dk
                    : k_min + interval.start.offset + dk;
  long beyond = interval.end.level == LevelMarker::end ? interval.end.offset + dk
                                                       : interval.end.offset + dk - k_min;
  return {std::min(lowest, 0L), std::max(beyond, 0L)};
}

} // namespace

ExtentAnalysis compute_extents(const StencilDefinition &def,
                               const std::vector<TempDecl> &temporaries, long k_min) {
  ExtentAnalysis out;
  std::set<std::string> temp_names;
  for (const auto &t : temporaries) {
    temp_names.insert(t.name);
    out.temporary_extents[t.name] = Extent::zero();
  }
  for (const auto &f : def.api_fields)
    out.field_extents[f.name] = Extent::zero();

  std::map<std::string, Extent> required; // horizontal need per temporary
  auto stages = flatten(def);
  out.stage_extents.assign(stages.size(), Extent::zero());

  for (std::size_t n = stages.size(); n-- > 0;) {
    const FlatStage &stage = stages[n];
    Extent compute = Extent::zero();
    visit_assignments(*stage.stmt, [&](const Stmt &s) {
      if (temp_names.count(s.target.name))
        compute = compute.united(required[s.target.name]);
    });
    compute = compute.horizontal();
    out.stage_extents[n] = compute;
    visit_assignments(*stage.stmt, [&](const Stmt &s) {
      if (temp_names.count(s.target.name))
        out.temporary_extents[s.target.name] =
            out.temporary_extents[s.target.name].united(compute);
    });

    visit_exprs(*stage.stmt, [&](const Expr &e) {
      if (e.kind != Expr::Kind::field_access)
        return;
      Extent reach = compute.shifted(e.offset);
      auto [klo, khi] = vertical_reach(stage.interval, e.offset[2], k_min);
      reach.lo[2] = klo;
      reach.hi[2] = khi;
      if (temp_names.count(e.name)) {
        required[e.name] = required[e.name].united(reach.horizontal());
        out.temporary_extents[e.name] = out.temporary_extents[e.name].united(reach);
      } else if (out.field_extents.count(e.name)) {
        out.field_extents[e.name] = out.field_extents[e.name].united(reach);
      }
    });
  }
  return out;
}

StencilImplementation build_implementation(const StencilDefinition &def,
                                           const ExtentAnalysis &extents,
                                           const std::vector<TempDecl> &temporaries,
                                           long k_min) {
  StencilImplementation impl;
  impl.name = def.name;
  impl.api_fields = def.api_fields;
  impl.api_scalars = def.api_scalars;
  impl.k_min = k_min;
  impl.externals = def.externals;
  impl.field_extents = extents.field_extents;
  for (const auto &t : temporaries) {
    TempDecl decl = t;
    if (auto it = extents.temporary_extents.find(t.name); it != extents.temporary_extents.end())
      decl.extent = it->second;
    impl.temporaries.push_back(decl);
  }
  std::size_t flat = 0;
  for (const auto &comp : def.computations) {
    MultiStage ms;
    ms.order = comp.order;
    for (std::size_t b = 0; b < comp.blocks.size(); ++b) {
      const auto &block = comp.blocks[b];
      for (const auto &stmt : block.body) {
        Stage stage;
        stage.interval = block.interval.value_or(Interval::full());
        stage.block = b;
        stage.body = stmt;
        stage.compute_extent = extents.stage_extents.at(flat++);
        ms.stages.push_back(std::move(stage));
      }
    }
    impl.multistages.push_back(std::move(ms));
  }
  return impl;
}

LoweringResult lower(const StencilDefinition &def, const std::string &file) {
  auto fail_if_errors = [&](const std::vector<Diagnostic> &diags) {
    if (has_errors(diags)) {
      std::vector<Diagnostic> errors;
      for (const auto &d : diags)
        if (d.severity == Severity::error)
          errors.push_back(d);
      throw CompileError(std::move(errors), file);
    }
  };

  fail_if_errors(validate_semantics(def));
  NormalizedIntervals normalized = normalize_intervals(def);
  fail_if_errors(normalized.diagnostics);
  TemporaryAnalysis temps = detect_temporaries(normalized.definition);
  fail_if_errors(temps.diagnostics);
  ExtentAnalysis extents =
      compute_extents(normalized.definition, temps.temporaries, normalized.k_min);

  LoweringResult result;
  result.implementation = build_implementation(normalized.definition, extents,
                                               temps.temporaries, normalized.k_min);
  for (const auto &d : temps.diagnostics)
    if (d.severity == Severity::warning)
      result.warnings.push_back(d);
  return result;
}

} // namespace gts
