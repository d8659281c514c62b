#pragma once

#include "gts/runtime.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace gts {

// ---------------------------------------------------------------------------
// Committed kernels
// ---------------------------------------------------------------------------

struct KernelInfo {
  std::string name;
  std::string file_name;
  std::string_view source;
  ExternalsBinding default_externals;
};

/// hdiff and vadv, embedded from kernels/*.gts at build time.
const std::vector<KernelInfo> &builtin_kernels();
/// Throws UnknownStencil listing the available kernels.
const KernelInfo &find_kernel(std::string_view name);
SourceProgram kernel_program(const KernelInfo &kernel);

// ---------------------------------------------------------------------------
// Field helpers
// ---------------------------------------------------------------------------

/// Fills every element of `f` (padding excluded) from a seeded generator in
/// logical index order, so equal seeds give equal logical contents in any
/// layout. Values are uniform in [lo, hi).
void fill_random(FieldStorage &f, std::uint64_t seed, double lo = -1.0, double hi = 1.0);

/// |a - b| / max(|a|, |b|) with 0/0 and NaN/NaN counted as equal and any
/// other NaN mismatch as infinite.
double relative_difference(double a, double b);

/// Maximum relative difference over `domain` points starting at each
/// field's storage origin.
double max_relative_difference(const FieldStorage &a, const FieldStorage &b, const Index3 &domain);

/// Fields and scalars for one invocation of a stencil.
struct StencilInputs {
  std::map<std::string, FieldStorage> fields;
  std::map<std::string, double> scalars;
  Index3 domain{0, 0, 0};
  /// 0 selects default_num_threads().
  int num_threads = 0;

  /// Arguments referring to the fields held here.
  InvocationArgs arguments();
};

/// Random inputs for any compiled stencil: every field gets a symmetric halo
/// covering its extent, the layout its backend expects and values from
/// `seed`. Logical contents depend only on the seed.
StencilInputs make_random_inputs(const CompiledStencil &stencil, const Index3 &domain,
                                 std::uint64_t seed);

/// Inputs for a committed kernel. vadv coefficients form diagonally
/// dominant systems (|b| > |a| + |c|).
StencilInputs make_kernel_inputs(std::string_view kernel, const CompiledStencil &stencil,
                                 const Index3 &domain, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Independent oracles
// ---------------------------------------------------------------------------

/// Nested-loop flux-limited diffusion over `domain`, anchored at each
/// storage origin.
void hdiff_reference(const FieldStorage &inp, FieldStorage &out, double coeff,
                     const Index3 &domain, double lim = 0.0);

/// Per column, assembles the dense K x K tridiagonal matrix and solves it by
/// Gaussian elimination with partial pivoting.
void vadv_reference(const FieldStorage &a, const FieldStorage &b, const FieldStorage &c,
                    const FieldStorage &d, FieldStorage &x, const Index3 &domain);

// ---------------------------------------------------------------------------
// Differential runs
// ---------------------------------------------------------------------------

struct FieldDifference {
  std::string field;
  double max_relative = 0.0;
};

struct DiffCase {
  Index3 domain{0, 0, 0};
  std::string reference_backend;
  std::string backend;
  std::vector<FieldDifference> fields;
};

/// Runs every stencil on identical random inputs and compares each backend
/// with the first one over the compute domain.
std::vector<DiffCase> run_diff(const std::vector<CompiledStencil> &stencils,
                               const std::vector<Index3> &domains, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Benchmarks
// ---------------------------------------------------------------------------

struct BenchmarkResult {
  std::string kernel;
  BackendId backend = BackendId::debug;
  Index3 domain{0, 0, 0};
  int repetitions = 0;
  std::int64_t kernel_ns_median = 0;
  std::int64_t kernel_ns_min = 0;
  std::int64_t total_ns_median = 0;
  ValidationPolicy validation = ValidationPolicy::full;
};

inline constexpr int kWarmupCalls = 3;
inline constexpr int kMinRepetitions = 5;

/// Times `reps` calls after kWarmupCalls discarded ones.
BenchmarkResult benchmark(const std::string &kernel, const CompiledStencil &stencil,
                          StencilInputs &inputs, int reps);

std::string csv_header();
std::string csv_row(const BenchmarkResult &result);

std::int64_t median(std::vector<std::int64_t> values);

} // namespace gts
