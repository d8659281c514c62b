// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include "gts/bench.hpp"
#include "gts/gtsf.hpp"
#include "poison.hpp"
#include "random_stencil.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <unistd.h>

namespace fs = std::filesystem;
using namespace gts;

namespace {

constexpr std::array<BackendId, 3> kBackends = {BackendId::debug, BackendId::vec, BackendId::gen};

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string format(const char *fmt, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, a);
  return buf;
}

std::string dims(const Index3 &d) {
  return std::to_string(d[0]) + "x" + std::to_string(d[1]) + "x" + std::to_string(d[2]);
}

CompiledStencil compile_kernel(const std::string &name, BackendId backend,
                               ExternalsBinding externals = {}) {
  const KernelInfo &k = find_kernel(name);
  if (externals.empty())
    externals = k.default_externals;
  return compile_stencil(kernel_program(k), k.name, backend, externals);
}

bool bitwise_equal(const FieldStorage &a, const FieldStorage &b) {
  if (a.shape() != b.shape() || a.dtype() != b.dtype())
    return false;
  for (long i = 0; i < a.shape()[0]; ++i)
    for (long j = 0; j < a.shape()[1]; ++j)
      for (long k = 0; k < a.shape()[2]; ++k)
        if (std::memcmp(a.element_ptr(i, j, k), b.element_ptr(i, j, k), a.element_size()) != 0)
          return false;
  return true;
}

// ---------------------------------------------------------------------------
// Shared random corpus
// ---------------------------------------------------------------------------

constexpr int kCorpusSize = 200;

struct CorpusEntry {
  testing::RandomStencil program;
  std::vector<CompiledStencil> compiled; ///< debug, vec, gen
  Index3 domain{0, 0, 0};
};

std::vector<CorpusEntry> &corpus() {
  static std::vector<CorpusEntry> entries = [] {
    std::vector<CorpusEntry> out;
    std::mt19937_64 rng(20240611);
    for (int n = 0; n < kCorpusSize; ++n) {
      CorpusEntry e;
      e.program = testing::random_stencil(rng, n);
      e.domain = testing::random_domain(rng, e.program.k_min);
      SourceProgram src{e.program.source, e.program.name + ".gts"};
      for (BackendId id : kBackends)
        e.compiled.push_back(compile_stencil(src, e.program.name, id));
      out.push_back(std::move(e));
    }
    return out;
  }();
  return entries;
}

double tolerance(const CompiledStencil &stencil, const std::string &field) {
  for (const auto &f : stencil.fields())
    if (f.name == field)
      return f.dtype == DType::f32 ? 1e-5 : 1e-13;
  return 1e-13;
}

// ---------------------------------------------------------------------------
// Criteria
// ---------------------------------------------------------------------------

Outcome backend_equivalence() {
  long cases = 0, bitwise = 0;
  double worst = 0.0;
  std::string failure;
  auto check = [&](const std::string &label, const std::vector<CompiledStencil> &stencils,
                   const Index3 &domain, std::uint64_t seed) {
    for (const auto &c : run_diff(stencils, {domain}, seed)) {
      ++cases;
      bool all_zero = true;
      for (const auto &f : c.fields) {
        worst = std::max(worst, f.max_relative);
        all_zero = all_zero && f.max_relative == 0.0;
        if (f.max_relative > tolerance(stencils[0], f.field) && failure.empty())
          failure = label + " " + c.backend + " field " + f.field + " at " + dims(domain) +
                    format(" rel %.3g", f.max_relative);
      }
      bitwise += all_zero ? 1 : 0;
    }
  };

  for (const std::string name : {"hdiff", "vadv"}) {
    std::vector<CompiledStencil> stencils;
    for (BackendId id : kBackends)
      stencils.push_back(compile_kernel(name, id));
    for (const Index3 &d : {Index3{16, 16, 16}, Index3{7, 13, 5}, Index3{1, 1, 1},
                            Index3{16, 3, 11}})
      check(name, stencils, d, 7);
  }
  int rejected = 0;
  for (const auto &e : corpus()) {
    rejected += e.program.rejected;
    check(e.program.name, e.compiled, e.domain, 11);
  }
  std::string detail = std::to_string(kCorpusSize) + " random + hdiff + vadv, " +
                       std::to_string(cases) + " backend pairs, " + std::to_string(bitwise) +
                       " bitwise-equal, max rel " + format("%.3g", worst) + ", " +
                       std::to_string(rejected) + " generator rejections";
  if (!failure.empty())
    return {false, "mismatch: " + failure + "; " + detail};
  return {true, detail};
}

/// Largest per-column error max_k |x - ref| / max_k |ref| over the domain.
/// Relative error of a solution vector is measured in the max norm.
double column_relative_error(const FieldStorage &x, const FieldStorage &ref,
                             const Index3 &domain) {
  double worst = 0.0;
  const Index3 &ox = x.origin();
  const Index3 &orf = ref.origin();
  for (long i = 0; i < domain[0]; ++i)
    for (long j = 0; j < domain[1]; ++j) {
      double diff = 0.0, scale = 0.0;
      for (long k = 0; k < domain[2]; ++k) {
        const double r = ref.get(orf[0] + i, orf[1] + j, orf[2] + k);
        diff = std::max(diff, std::fabs(x.get(ox[0] + i, ox[1] + j, ox[2] + k) - r));
        scale = std::max(scale, std::fabs(r));
      }
      if (diff > 0.0)
        worst = std::max(worst, scale > 0.0 ? diff / scale : INFINITY);
    }
  return worst;
}

Outcome oracle_correctness() {
  double worst_vadv = 0.0, worst_vadv_elementwise = 0.0, worst_hdiff = 0.0;
  long systems = 0;
  for (BackendId id : kBackends) {
    CompiledStencil vadv = compile_kernel("vadv", id);
    for (long K : {1L, 3L, 8L, 80L}) {
      const Index3 domain{10, 10, K};
      StencilInputs in = make_kernel_inputs("vadv", vadv, domain, 100 + K);
      InvocationArgs args = in.arguments();
      invoke(vadv, args);
      FieldStorage expected = in.fields.at("x");
      vadv_reference(in.fields.at("a"), in.fields.at("b"), in.fields.at("c"), in.fields.at("d"),
                     expected, domain);
      worst_vadv =
          std::max(worst_vadv, column_relative_error(in.fields.at("x"), expected, domain));
      worst_vadv_elementwise = std::max(
          worst_vadv_elementwise, max_relative_difference(in.fields.at("x"), expected, domain));
      systems += domain[0] * domain[1];
    }
    CompiledStencil hdiff = compile_kernel("hdiff", id);
    for (const Index3 &domain : {Index3{8, 8, 8}, Index3{16, 16, 16}, Index3{32, 32, 32},
                                 Index3{64, 64, 80}}) {
      StencilInputs in = make_kernel_inputs("hdiff", hdiff, domain, 200 + domain[0]);
      InvocationArgs args = in.arguments();
      invoke(hdiff, args);
      FieldStorage expected = in.fields.at("out");
      hdiff_reference(in.fields.at("inp"), expected, in.scalars.at("coeff"), domain, 0.0);
      worst_hdiff = std::max(worst_hdiff, max_relative_difference(in.fields.at("out"), expected,
                                                                  domain));
    }
  }
  std::string detail = "vadv " + std::to_string(systems) + " systems K in {1,3,8,80} max column rel " +
                       format("%.3g", worst_vadv) + " (bar 1e-12, elementwise " +
                       format("%.3g", worst_vadv_elementwise) + "); hdiff 8^3..64^2x80 max rel " +
                       format("%.3g", worst_hdiff) + " (bar 1e-14); all backends";
  return {worst_vadv <= 1e-12 && worst_hdiff <= 1e-14, detail};
}

long poisoned_nans(const CompiledStencil &stencil, const Index3 &domain, std::uint64_t seed,
                   const std::map<std::string, Extent> &extents = {}) {
  StencilInputs in = testing::make_poisoned_inputs(stencil, domain, seed, extents);
  InvocationArgs args = in.arguments();
  invoke(stencil, args);
  long nans = 0;
  for (const auto &[name, f] : in.fields)
    nans += testing::count_nans(f, domain);
  return nans;
}

Outcome extent_soundness() {
  long runs = 0;
  std::string failure;
  for (BackendId id : kBackends)
    for (const std::string name : {"hdiff", "vadv"}) {
      CompiledStencil s = compile_kernel(name, id);
      for (const Index3 &d : {Index3{12, 9, 7}, Index3{1, 1, 1}, Index3{16, 16, 16}}) {
        ++runs;
        if (long n = poisoned_nans(s, d, 5); n > 0 && failure.empty())
          failure = name + " on " + std::string(to_string(id)) + ": " + std::to_string(n) +
                    " NaNs";
      }
    }
  for (const auto &e : corpus())
    for (const auto &s : e.compiled) {
      ++runs;
      if (long n = poisoned_nans(s, e.domain, 9); n > 0 && failure.empty())
        failure = e.program.name + " on " + std::string(to_string(s.backend())) + ": " +
                  std::to_string(n) + " NaNs";
    }

  // Tightness: shrinking any horizontal component of hdiff's input extent
  // by one exposes poison.
  int tight = 0, components = 0;
  for (BackendId id : kBackends) {
    CompiledStencil hdiff = compile_kernel("hdiff", id);
    const Extent full = hdiff.field_extent("inp");
    for (int d = 0; d < 2; ++d)
      for (int side = 0; side < 2; ++side) {
        Extent shrunk = full;
        if (side == 0)
          shrunk.lo[d] += 1;
        else
          shrunk.hi[d] -= 1;
        ++components;
        tight += poisoned_nans(hdiff, {12, 12, 4}, 3, {{"inp", shrunk}}) > 0 ? 1 : 0;
      }
  }
  std::string detail = std::to_string(runs) + " poisoned runs, hdiff inp extent tight in " +
                       std::to_string(tight) + "/" + std::to_string(components) +
                       " shrunk components";
  if (!failure.empty())
    return {false, "NaN in compute domain: " + failure + "; " + detail};
  return {tight == components, detail};
}

Outcome performance_ordering() {
  constexpr int kReps = 7;
  const Index3 domain{128, 128, 80};
  bool pass = true;
  std::string detail;
  for (const std::string name : {"hdiff", "vadv"}) {
    std::vector<CompiledStencil> stencils;
    std::vector<StencilInputs> inputs;
    for (BackendId id : kBackends) {
      stencils.push_back(compile_kernel(name, id));
      inputs.push_back(make_kernel_inputs(name, stencils.back(), domain, 1));
    }
    std::vector<std::vector<std::int64_t>> kernel_ns(kBackends.size());
    // Interleave backends so machine-load drift affects all of them alike.
    for (int rep = -kWarmupCalls; rep < kReps; ++rep)
      for (std::size_t b = 0; b < kBackends.size(); ++b) {
        InvocationArgs args = inputs[b].arguments();
        ExecutionReport r = invoke(stencils[b], args);
        if (rep >= 0)
          kernel_ns[b].push_back(r.kernel_ns);
      }
    const double debug = static_cast<double>(median(kernel_ns[0]));
    const double vec = static_cast<double>(median(kernel_ns[1]));
    const double gen = static_cast<double>(median(kernel_ns[2]));
    pass = pass && gen * 5.0 <= vec && vec * 5.0 <= debug;
    detail += (detail.empty() ? "" : "; ") + name + " median ms debug " +
              format("%.1f", debug / 1e6) + " vec " + format("%.1f", vec / 1e6) + " gen " +
              format("%.2f", gen / 1e6) + ", debug/vec " + format("%.1fx", debug / vec) +
              " vec/gen " + format("%.1fx", vec / gen);
  }
  return {pass, detail + " (bar 5x each, 128x128x80)"};
}

Outcome validation_overhead() {
  constexpr int kReps = 1000;
  const Index3 domain{32, 32, 80};
  CompiledStencil full = compile_kernel("hdiff", BackendId::gen);
  CompiledStencil skip = full.with_validation(ValidationPolicy::skip);
  // Both variants share one set of storages so memory placement cannot bias
  // one kernel against the other.
  StencilInputs in = make_kernel_inputs("hdiff", full, domain, 4);
  InvocationArgs args_full = in.arguments();
  InvocationArgs args_skip = in.arguments();
  invoke(full, args_full);
  const FieldStorage out_full = in.fields.at("out");
  fill_random(in.fields.at("out"), 99);
  invoke(skip, args_skip);
  const bool identical = bitwise_equal(out_full, in.fields.at("out"));

  // Non-kernel time per call (argument handling, validation, dispatch) is
  // compared alongside totals because it excludes kernel jitter.
  std::vector<std::int64_t> total_full, total_skip, kernel_full, kernel_skip, validation;
  std::vector<std::int64_t> outside_full, outside_skip;
  auto record_full = [&] {
    ExecutionReport r = invoke(full, args_full);
    total_full.push_back(r.total_ns);
    kernel_full.push_back(r.kernel_ns);
    validation.push_back(r.validation_ns);
    outside_full.push_back(r.total_ns - r.kernel_ns);
  };
  auto record_skip = [&] {
    ExecutionReport r = invoke(skip, args_skip);
    total_skip.push_back(r.total_ns);
    kernel_skip.push_back(r.kernel_ns);
    outside_skip.push_back(r.total_ns - r.kernel_ns);
  };
  // Alternate which variant goes first so ordering effects cancel.
  for (int rep = 0; rep < kReps; ++rep) {
    if (rep % 2 == 0) {
      record_full();
      record_skip();
    } else {
      record_skip();
      record_full();
    }
  }
  const double tf = static_cast<double>(median(total_full));
  const double ts = static_cast<double>(median(total_skip));
  const double kf = static_cast<double>(median(kernel_full));
  const double ks = static_cast<double>(median(kernel_skip));
  const double of = static_cast<double>(median(outside_full));
  const double os = static_cast<double>(median(outside_skip));
  const double v = static_cast<double>(median(validation));
  const double kernel_gap = std::fabs(kf - ks) / std::max(kf, ks);
  std::string detail = "32x32x80 gen, " + std::to_string(kReps) + " interleaved calls each; " +
                       "median total full " + format("%.1f", tf / 1e3) + " us vs skip " +
                       format("%.1f", ts / 1e3) + " us (margin " +
                       format("%.1f", (tf - ts) / 1e3) + " us); non-kernel " +
                       format("%.1f", of / 1e3) + " vs " + format("%.1f", os / 1e3) +
                       " us; validation " + format("%.1f", v / 1e3) + " us; kernel " +
                       format("%.1f", kf / 1e3) + " vs " + format("%.1f", ks / 1e3) +
                       " us (gap " + format("%.1f%%", 100.0 * kernel_gap) + "); outputs " +
                       (identical ? "bitwise identical" : "DIFFER");
  const bool pass = identical && tf > ts && of > os && v > 0.0 && kernel_gap <= 0.10;
  return {pass, detail};
}

Outcome cache_behaviour() {
  const fs::path root = fs::temp_directory_path() /
                        ("gts-acceptance-cache-" + std::to_string(::getpid()));
  fs::remove_all(root);
  CompileOptions options;
  options.cache_root = root.string();
  const KernelInfo &k = find_kernel("hdiff");

  // Same program, restyled: extra comments, blank lines and spacing.
  std::string restyled = "# restyled copy\n\n";
  for (char c : k.source) {
    restyled += c;
    if (c == ',')
      restyled += "  ";
    if (c == '\n')
      restyled += "\n";
  }
  restyled += "\n# trailing comment\n";

  const auto before_cold = compiler_invocation_count();
  CompiledStencil cold =
      compile_stencil(kernel_program(k), "hdiff", BackendId::gen, {{"LIM", 0.0}}, options);
  const auto after_cold = compiler_invocation_count();
  CompiledStencil warm = compile_stencil({restyled, "hdiff_restyled.gts"}, "hdiff",
                                         BackendId::gen, {{"LIM", 0.0}}, options);
  const auto after_warm = compiler_invocation_count();
  CompiledStencil changed =
      compile_stencil(kernel_program(k), "hdiff", BackendId::gen, {{"LIM", 0.5}}, options);
  const auto after_changed = compiler_invocation_count();
  fs::remove_all(root);

  const bool same_path = cold.gen_module().shared_object == warm.gen_module().shared_object;
  const bool pass = after_cold - before_cold == 1 && after_warm == after_cold && warm.cache_hit() &&
                    same_path && after_changed - after_warm == 1 &&
                    changed.gen_module().shared_object != cold.gen_module().shared_object;
  std::string detail =
      "cold compile " + std::to_string(after_cold - before_cold) + " invocation(s), restyled " +
      std::to_string(after_warm - after_cold) + " (cache " + (warm.cache_hit() ? "hit" : "miss") +
      ", same .so path " + (same_path ? "yes" : "no") + "), LIM changed " +
      std::to_string(after_changed - after_warm);
  return {pass, detail};
}

Outcome thread_determinism() {
  const Index3 domain{64, 64, 80};
  bool pass = true;
  std::string detail;
  for (const std::string name : {"hdiff", "vadv"}) {
    CompiledStencil s = compile_kernel(name, BackendId::gen);
    std::vector<FieldStorage> outputs;
    for (const char *threads : {"1", "2", "8"}) {
      ::setenv("GTS_NUM_THREADS", threads, 1);
      StencilInputs in = make_kernel_inputs(name, s, domain, 8);
      InvocationArgs args = in.arguments();
      invoke(s, args);
      outputs.push_back(in.fields.at(name == "hdiff" ? "out" : "x"));
    }
    ::unsetenv("GTS_NUM_THREADS");
    const bool same = bitwise_equal(outputs[0], outputs[1]) && bitwise_equal(outputs[0], outputs[2]);
    pass = pass && same;
    detail += (detail.empty() ? "" : ", ") + name + (same ? " identical" : " DIFFERS");
  }
  return {pass, detail + " for GTS_NUM_THREADS in {1,2,8} at 64x64x80"};
}

Outcome gtsf_round_trip() {
  std::mt19937_64 rng(99);
  auto uniform = [&](long lo, long hi) { return std::uniform_int_distribution<long>(lo, hi)(rng); };
  const std::array<std::array<int, 3>, 6> perms = {
      {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};
  int passed = 0, nan_elements = 0;
  for (int n = 0; n < 1000; ++n) {
    const DType dtype = uniform(0, 1) ? DType::f64 : DType::f32;
    LayoutSpec write_layout, read_layout;
    write_layout.permutation = perms[static_cast<std::size_t>(uniform(0, 5))];
    write_layout.alignment_bytes = std::size_t{8} << uniform(0, 4);
    read_layout.permutation = perms[static_cast<std::size_t>(uniform(0, 5))];
    read_layout.alignment_bytes = std::size_t{8} << uniform(0, 4);
    const Index3 shape{uniform(1, 9), uniform(1, 9), uniform(1, 9)};
    const Index3 origin{uniform(0, shape[0] - 1), uniform(0, shape[1] - 1),
                        uniform(0, shape[2] - 1)};
    FieldStorage f = FieldStorage::with_shape(dtype, shape, origin, write_layout);
    for (long i = 0; i < shape[0]; ++i)
      for (long j = 0; j < shape[1]; ++j)
        for (long k = 0; k < shape[2]; ++k) {
          std::uint64_t bits = rng();
          if (uniform(0, 9) == 0) {
            // Quiet or signalling NaN with a random payload.
            bits = dtype == DType::f64 ? (0x7ff0000000000000ull | (bits & 0x000fffffffffffffull) | 1)
                                       : (0x7f800000u | (bits & 0x007fffffu) | 1);
            ++nan_elements;
          }
          std::memcpy(f.element_ptr(i, j, k), &bits, f.element_size());
        }
    std::stringstream buffer;
    write_gtsf(f, buffer);
    FieldStorage g = read_gtsf(buffer, read_layout);
    if (g.dtype() == f.dtype() && g.origin() == f.origin() && bitwise_equal(f, g))
      ++passed;
  }
  return {passed == 1000, std::to_string(passed) + "/1000 fields bit-exact across dtypes and " +
                              "layouts, " + std::to_string(nan_elements) + " NaN payloads"};
}

} // namespace

/// Runs every criterion, or only the ids given on the command line.
int main(int argc, char **argv) {
  struct Criterion {
    int id;
    const char *name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "backend equivalence", backend_equivalence},
      {2, "oracle correctness", oracle_correctness},
      {3, "extent soundness", extent_soundness},
      {4, "performance ordering", performance_ordering},
      {5, "validation overhead", validation_overhead},
      {6, "cache behaviour", cache_behaviour},
      {7, "threading determinism", thread_determinism},
      {8, "GTSF round trip", gtsf_round_trip},
  };
  int failures = 0;
  std::vector<int> selected;
  for (int a = 1; a < argc; ++a)
    selected.push_back(std::atoi(argv[a]));
  for (const auto &c : criteria) {
    if (!selected.empty() && std::find(selected.begin(), selected.end(), c.id) == selected.end())
      continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception &e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failures += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << c.id << " " << c.name << " ("
              << format("%.1f", seconds) << " s): " << o.detail << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
