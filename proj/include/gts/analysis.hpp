#pragma once

#include "gts/ir.hpp"

#include <map>
#include <vector>

namespace gts {

/// Legality checks on an inlined, externals-bound definition. Never throws.
///
/// Errors:
///  - SelfAssignParallel: PARALLEL statement reads its own target at a
///    nonzero offset.
///  - SelfOffsetRead: any statement reads its own target at a nonzero
///    horizontal offset.
///  - VerticalOrderViolation: FORWARD reads a field written in the same
///    computation at k > 0 (BACKWARD: k < 0).
///  - ParallelVerticalDependence: PARALLEL reads a field written in the same
///    computation at a nonzero vertical offset.
///  - TargetOffset, ScalarAssignment: malformed assignment targets.
///  - IfBlockOffsetRead: a field written inside an if/else block is read at a
///    nonzero horizontal offset inside that block.
std::vector<Diagnostic> validate_semantics(const StencilDefinition &def);

struct NormalizedIntervals {
  StencilDefinition definition;
  long k_min = 1;
  std::vector<Diagnostic> diagnostics;
};

/// Fills implicit intervals, derives the minimum vertical size and checks
/// emptiness, pairwise disjointness and listing order.
NormalizedIntervals normalize_intervals(const StencilDefinition &def);

/// Smallest K for which every interval bound lies in [0, K] with start <= end.
long minimum_k_size(const std::vector<Interval> &intervals);

/// True when [a) and [b) share a level for some K >= k_min.
bool intervals_may_overlap(const Interval &a, const Interval &b, long k_min);

struct TemporaryAnalysis {
  std::vector<TempDecl> temporaries; ///< extents are filled by compute_extents
  std::vector<Diagnostic> diagnostics;
};

TemporaryAnalysis detect_temporaries(const StencilDefinition &def);

struct ExtentAnalysis {
  std::map<std::string, Extent> field_extents;
  /// Compute extent per stage, flattened in program order.
  std::vector<Extent> stage_extents;
  std::map<std::string, Extent> temporary_extents;
};

/// Backward extent propagation. `def` must have normalized intervals.
ExtentAnalysis compute_extents(const StencilDefinition &def,
                               const std::vector<TempDecl> &temporaries, long k_min);

StencilImplementation build_implementation(const StencilDefinition &def,
                                           const ExtentAnalysis &extents,
                                           const std::vector<TempDecl> &temporaries,
                                           long k_min);

struct LoweringResult {
  StencilImplementation implementation;
  std::vector<Diagnostic> warnings;
};

/// Runs every pass; throws CompileError with all error diagnostics if any.
LoweringResult lower(const StencilDefinition &def, const std::string &file = {});

} // namespace gts
