#pragma once

#include "gts/backends.hpp"
#include "gts/serialize.hpp"

#include <cstdint>
#include <memory>
#include <string>

namespace gts {

struct GenOptions {
  /// Test-only: shrinks the i range of the last stage writing an api field by
  /// one point. Enabled by GTS_GEN_FAULT=1.
  bool inject_fault = false;

  static GenOptions from_environment();
  /// Folded into the fingerprint so option changes miss the cache.
  std::string config_string() const;
};

/// `gts_run_<name>_<first 8 digest hex digits>`.
std::string entry_symbol(const StencilImplementation &impl, const Fingerprint &fp);
/// `gts_call_<name>_<first 8 digest hex digits>`.
std::string trampoline_symbol(const StencilImplementation &impl, const Fingerprint &fp);

/// Self-contained C++17 translation unit. Exported entry points:
///
///   extern "C" void gts_run_<name>_<d8>(
///       long ni, long nj, long nk,
///       // per api field, in signature order:
///       T *base, long si, long sj, long sk, long oi, long oj, long ok,
///       // per scalar, in signature order (T = float or double):
///       T value,
///       int num_threads);
///
///   extern "C" void gts_call_<name>_<d8>(const long *domain, void *const *fields,
///       const long *field_ints, const double *scalars, int num_threads);
///
/// `base` addresses logical element (0,0,0) of the storage; strides are in
/// elements; (oi,oj,ok) is the storage index of compute-domain point (0,0,0).
/// `field_ints` holds si,sj,sk,oi,oj,ok for each field in turn.
std::string generate_source(const StencilImplementation &impl, const Fingerprint &fp,
                            const GenOptions &options = {});

/// External C++ compiler used by the gen backend.
struct Toolchain {
  std::string compiler; ///< GTS_CC, default `c++`
  std::string version;  ///< first line of `compiler --version`
  std::string flags;

  /// Compiler, version and flags; part of the fingerprint.
  std::string identity() const;
};

/// Probes the compiler named by GTS_CC once per distinct value.
/// Throws ToolchainMissing when it cannot be run.
Toolchain detect_toolchain();

/// `$GTS_CACHE_DIR`, else `$XDG_CACHE_HOME/stencil-forge`, else
/// `$HOME/.cache/stencil-forge`.
std::string default_cache_root();

/// Directory cache keyed by fingerprint: `<root>/<hex digest>/` holds
/// `stencil.cpp`, `stencil.so` and `meta.json`. Entries are built in a
/// private directory and installed with an atomic rename.
class BuildCache {
public:
  explicit BuildCache(std::string root) : root_(std::move(root)) {}
  static BuildCache from_environment() { return BuildCache(default_cache_root()); }

  const std::string &root() const { return root_; }
  std::string entry_dir(const Fingerprint &fp) const;

private:
  std::string root_;
};

/// Number of external compiler runs in this process.
std::uint64_t compiler_invocation_count();

using GenTrampoline = void (*)(const long *, void *const *, const long *, const double *, int);

struct GenModule {
  std::shared_ptr<void> handle; ///< dlopen handle
  GenTrampoline call = nullptr;
  std::string shared_object;
  std::string source_path;
  bool cache_hit = false;
  /// True when a cached entry failed verification and was rebuilt.
  bool recovered_corrupt_entry = false;
};

/// Loads the cached entry for `fp`, or compiles `source` and installs it.
/// Errors: ToolchainMissing, CompileFailed (with compiler output),
/// SymbolNotFound. A corrupt entry is discarded and rebuilt.
GenModule compile_and_load(const std::string &source, const Fingerprint &fp,
                           const std::string &symbol, const BuildCache &cache,
                           const Toolchain &toolchain);

void run_gen(const GenModule &module, const StencilImplementation &impl,
             const CallArguments &args);

} // namespace gts
