#pragma once

#include "gts/backends.hpp"
#include "gts/frontend.hpp"
#include "gts/gen.hpp"
#include "gts/serialize.hpp"
#include "gts/storage.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace gts {

enum class ValidationPolicy { full, skip };

struct CompileOptions {
  /// Cache root for gen; defaults to default_cache_root().
  std::optional<std::string> cache_root;
  GenOptions gen = GenOptions::from_environment();
};

/// Immutable handle to a compiled stencil. Copies share state.
class CompiledStencil {
public:
  const std::string &name() const { return state_->definition.name; }
  BackendId backend() const { return state_->backend; }
  const Fingerprint &fingerprint() const { return state_->fingerprint; }
  /// Inlined definition with externals bound.
  const StencilDefinition &definition() const { return state_->definition; }
  const StencilImplementation &implementation() const { return state_->implementation; }
  const std::vector<FieldDecl> &fields() const { return state_->implementation.api_fields; }
  const std::vector<ScalarDecl> &scalars() const { return state_->implementation.api_scalars; }
  Extent field_extent(const std::string &field) const;
  long k_min() const { return state_->implementation.k_min; }
  const std::vector<Diagnostic> &warnings() const { return state_->warnings; }

  ValidationPolicy validation() const { return validation_; }
  /// Same stencil with another validation policy.
  CompiledStencil with_validation(ValidationPolicy policy) const {
    CompiledStencil copy = *this;
    copy.validation_ = policy;
    return copy;
  }

  /// gen only: whether the build cache already held the shared object.
  bool cache_hit() const { return state_->module.cache_hit; }
  const GenModule &gen_module() const { return state_->module; }
  const std::string &generated_source() const { return state_->source; }

private:
  friend CompiledStencil compile_stencil(const SourceProgram &, std::string_view, BackendId,
                                         const ExternalsBinding &, const CompileOptions &);
  friend CompiledStencil compile_definition(const StencilDefinition &, BackendId,
                                            const CompileOptions &, const std::string &);

  struct State {
    StencilDefinition definition;
    StencilImplementation implementation;
    BackendId backend = BackendId::debug;
    Fingerprint fingerprint;
    std::vector<Diagnostic> warnings;
    std::string source;
    GenModule module;
  };

  std::shared_ptr<const State> state_;
  ValidationPolicy validation_ = ValidationPolicy::full;
};

/// Full pipeline: parse, inline, bind externals, validate, normalize,
/// compute extents, lower, then build for `backend` (consulting the build
/// cache for gen). Throws CompileError with every diagnostic on failure.
CompiledStencil compile_stencil(const SourceProgram &src, std::string_view stencil_name,
                                BackendId backend, const ExternalsBinding &externals = {},
                                const CompileOptions &options = {});

/// Pipeline from an already inlined and bound definition.
CompiledStencil compile_definition(const StencilDefinition &def, BackendId backend,
                                   const CompileOptions &options = {},
                                   const std::string &file = {});

struct InvocationArgs {
  /// Non-owning; every signature field must be present.
  std::map<std::string, FieldStorage *> fields;
  std::map<std::string, double> scalars;
  std::optional<Index3> domain;
  /// Applies to every field without an entry in `field_origins`.
  std::optional<Index3> origin;
  std::map<std::string, Index3> field_origins;
  /// 0 means GTS_NUM_THREADS, else the hardware concurrency.
  int num_threads = 0;
};

struct ResolvedCall {
  Index3 domain{0, 0, 0};
  std::map<std::string, Index3> origins;
};

/// Default origin per field is its storage origin; the default domain is the
/// componentwise minimum of (shape - origin - extent.hi) over all fields.
/// Errors: DomainTooSmall, KBelowMinimum, OutOfBounds, MissingArgument.
ResolvedCall resolve_domain_origin(const CompiledStencil &stencil, const InvocationArgs &args);

struct ExecutionReport {
  std::int64_t total_ns = 0;
  std::int64_t validation_ns = 0;
  std::int64_t kernel_ns = 0;
};

/// Validates (per the stencil's policy) and runs. Full validation checks
/// argument names, dtypes, layouts, bounds and aliasing between fields.
ExecutionReport invoke(const CompiledStencil &stencil, const InvocationArgs &args);

/// Thread count from GTS_NUM_THREADS, else the hardware concurrency.
int default_num_threads();

} // namespace gts
