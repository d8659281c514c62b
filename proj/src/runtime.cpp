#include "gts/runtime.hpp"

#include "gts/analysis.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <limits>
#include <thread>

namespace gts {

namespace {

using Clock = std::chrono::steady_clock;

std::int64_t elapsed_ns(Clock::time_point from, Clock::time_point to) {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(to - from).count();
}

std::string triple(const Index3 &v) {
  return "(" + std::to_string(v[0]) + "," + std::to_string(v[1]) + "," + std::to_string(v[2]) +
         ")";
}

const char *axis_name(int d) { return d == 0 ? "i" : (d == 1 ? "j" : "k"); }

FieldStorage *lookup_field(const InvocationArgs &args, const std::string &name) {
  auto it = args.fields.find(name);
  if (it == args.fields.end() || !it->second)
    throw Error(ErrorCode::MissingArgument, "missing field argument '" + name + "'");
  return it->second;
}

Index3 origin_for(const InvocationArgs &args, const std::string &name, const FieldStorage &f) {
  if (auto it = args.field_origins.find(name); it != args.field_origins.end())
    return it->second;
  if (args.origin)
    return *args.origin;
  return f.origin();
}

ResolvedCall resolve(const CompiledStencil &stencil, const InvocationArgs &args, bool check) {
  ResolvedCall call;
  Index3 domain{std::numeric_limits<long>::max(), std::numeric_limits<long>::max(),
                std::numeric_limits<long>::max()};
  std::array<std::string, 3> binding;
  for (const auto &decl : stencil.fields()) {
    const FieldStorage &f = *lookup_field(args, decl.name);
    Index3 origin = origin_for(args, decl.name, f);
    call.origins[decl.name] = origin;
    Extent e = stencil.field_extent(decl.name);
    for (int d = 0; d < 3; ++d) {
      long fits = f.shape()[d] - origin[d] - e.hi[d];
      if (fits < domain[d]) {
        domain[d] = fits;
        binding[static_cast<std::size_t>(d)] = decl.name;
      }
    }
  }
  if (stencil.fields().empty())
    domain = {0, 0, 0};
  if (args.domain)
    domain = *args.domain;
  call.domain = domain;
  if (!check)
    return call;

  for (int d = 0; d < 3; ++d)
    if (domain[d] < 1) {
      std::string reason =
          args.domain ? "requested domain " + triple(domain)
                      : "field '" + binding[static_cast<std::size_t>(d)] +
                            "' leaves no room along " + axis_name(d);
      throw Error(ErrorCode::DomainTooSmall, "compute domain must be at least 1 along " +
                                                 std::string(axis_name(d)) + ": " + reason);
    }
  if (domain[2] < stencil.k_min())
    throw Error(ErrorCode::KBelowMinimum,
                "vertical domain size " + std::to_string(domain[2]) +
                    " is below the stencil minimum " + std::to_string(stencil.k_min()));
  for (const auto &decl : stencil.fields()) {
    const FieldStorage &f = *lookup_field(args, decl.name);
    const Index3 &origin = call.origins[decl.name];
    Extent e = stencil.field_extent(decl.name);
    for (int d = 0; d < 3; ++d) {
      if (origin[d] + e.lo[d] < 0 || origin[d] + domain[d] + e.hi[d] > f.shape()[d])
        throw Error(ErrorCode::OutOfBounds,
                    "field '" + decl.name + "' with shape " + triple(f.shape()) + " and origin " +
                        triple(origin) + " cannot hold domain " + triple(domain) +
                        " with extent " + to_string(e) + " along " + axis_name(d));
    }
  }
  return call;
}

void check_signature(const CompiledStencil &stencil, const InvocationArgs &args) {
  const LayoutSpec expected = default_layout(stencil.backend());
  for (const auto &decl : stencil.fields()) {
    const FieldStorage &f = *lookup_field(args, decl.name);
    if (f.empty())
      throw Error(ErrorCode::MissingArgument, "field argument '" + decl.name + "' is empty");
    if (f.dtype() != decl.dtype)
      throw Error(ErrorCode::DTypeMismatch, "field '" + decl.name + "' expects " +
                                                std::string(to_string(decl.dtype)) + ", got " +
                                                std::string(to_string(f.dtype())));
    if (f.layout().permutation != expected.permutation)
      throw Error(ErrorCode::LayoutMismatch,
                  "field '" + decl.name + "' has layout permutation (" +
                      std::to_string(f.layout().permutation[0]) + "," +
                      std::to_string(f.layout().permutation[1]) + "," +
                      std::to_string(f.layout().permutation[2]) + "), backend " +
                      std::string(to_string(stencil.backend())) + " expects (" +
                      std::to_string(expected.permutation[0]) + "," +
                      std::to_string(expected.permutation[1]) + "," +
                      std::to_string(expected.permutation[2]) + ")");
  }
  for (const auto &[name, ptr] : args.fields) {
    (void)ptr;
    if (!std::any_of(stencil.fields().begin(), stencil.fields().end(),
                     [&](const FieldDecl &d) { return d.name == name; }))
      throw Error(ErrorCode::UnexpectedArgument, "unexpected field argument '" + name + "'");
  }
  for (const auto &decl : stencil.scalars())
    if (!args.scalars.count(decl.name))
      throw Error(ErrorCode::MissingArgument, "missing scalar argument '" + decl.name + "'");
  for (const auto &[name, value] : args.scalars) {
    (void)value;
    if (!std::any_of(stencil.scalars().begin(), stencil.scalars().end(),
                     [&](const ScalarDecl &d) { return d.name == name; }))
      throw Error(ErrorCode::UnexpectedArgument, "unexpected scalar argument '" + name + "'");
  }

  const auto written = stencil.implementation().written_fields();
  const auto &decls = stencil.fields();
  for (std::size_t a = 0; a < decls.size(); ++a)
    for (std::size_t b = a + 1; b < decls.size(); ++b) {
      const FieldStorage *fa = args.fields.at(decls[a].name);
      const FieldStorage *fb = args.fields.at(decls[b].name);
      bool overlap = fa->allocation_begin() < fb->allocation_end() &&
                     fb->allocation_begin() < fa->allocation_end();
      bool involves_output =
          std::find(written.begin(), written.end(), decls[a].name) != written.end() ||
          std::find(written.begin(), written.end(), decls[b].name) != written.end();
      if (overlap && involves_output)
        throw Error(ErrorCode::AliasedFields, "fields '" + decls[a].name + "' and '" +
                                                  decls[b].name + "' share memory");
    }
}

CallArguments build_call(const CompiledStencil &stencil, const InvocationArgs &args,
                         const ResolvedCall &resolved) {
  CallArguments call;
  call.domain = resolved.domain;
  for (const auto &decl : stencil.fields()) {
    FieldStorage &f = *lookup_field(args, decl.name);
    call.fields.push_back({f.data(), f.dtype(), f.strides(), resolved.origins.at(decl.name)});
  }
  for (const auto &decl : stencil.scalars()) {
    auto it = args.scalars.find(decl.name);
    if (it == args.scalars.end())
      throw Error(ErrorCode::MissingArgument, "missing scalar argument '" + decl.name + "'");
    double v = it->second;
    call.scalars.push_back(decl.dtype == DType::f32 ? static_cast<double>(static_cast<float>(v))
                                                    : v);
  }
  call.num_threads = args.num_threads > 0 ? args.num_threads : default_num_threads();
  return call;
}

} // namespace

int default_num_threads() {
  if (const char *env = std::getenv("GTS_NUM_THREADS"); env && *env) {
    int n = std::atoi(env);
    if (n > 0)
      return n;
  }
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

Extent CompiledStencil::field_extent(const std::string &field) const {
  const auto &extents = state_->implementation.field_extents;
  auto it = extents.find(field);
  return it == extents.end() ? Extent{} : it->second;
}

CompiledStencil compile_definition(const StencilDefinition &def, BackendId backend,
                                   const CompileOptions &options, const std::string &file) {
  LoweringResult lowered = lower(def, file);
  auto state = std::make_shared<CompiledStencil::State>();
  state->definition = def;
  state->implementation = std::move(lowered.implementation);
  state->backend = backend;
  state->warnings = std::move(lowered.warnings);

  if (backend == BackendId::gen) {
    Toolchain toolchain = detect_toolchain();
    state->fingerprint = fingerprint(def, to_string(backend), def.externals,
                                     toolchain.identity(), options.gen.config_string());
    state->source = generate_source(state->implementation, state->fingerprint, options.gen);
    BuildCache cache(options.cache_root ? *options.cache_root : default_cache_root());
    state->module =
        compile_and_load(state->source, state->fingerprint,
                         trampoline_symbol(state->implementation, state->fingerprint), cache,
                         toolchain);
  } else {
    state->fingerprint = fingerprint(def, to_string(backend), def.externals, "", "");
  }

  CompiledStencil out;
  out.state_ = std::move(state);
  return out;
}

CompiledStencil compile_stencil(const SourceProgram &src, std::string_view stencil_name,
                                BackendId backend, const ExternalsBinding &externals,
                                const CompileOptions &options) {
  StencilDefinition def = load_stencil(src, stencil_name, externals);
  return compile_definition(def, backend, options, src.path);
}

ResolvedCall resolve_domain_origin(const CompiledStencil &stencil, const InvocationArgs &args) {
  return resolve(stencil, args, true);
}

ExecutionReport invoke(const CompiledStencil &stencil, const InvocationArgs &args) {
  ExecutionReport report;
  const auto start = Clock::now();
  ResolvedCall resolved;
  if (stencil.validation() == ValidationPolicy::full) {
    check_signature(stencil, args);
    resolved = resolve(stencil, args, true);
    report.validation_ns = elapsed_ns(start, Clock::now());
  } else {
    resolved = resolve(stencil, args, false);
  }
  CallArguments call = build_call(stencil, args, resolved);

  const auto kernel_start = Clock::now();
  switch (stencil.backend()) {
  case BackendId::debug: run_debug(stencil.implementation(), call); break;
  case BackendId::vec: run_vec(stencil.implementation(), call); break;
  case BackendId::gen: run_gen(stencil.gen_module(), stencil.implementation(), call); break;
  }
  const auto end = Clock::now();
  report.kernel_ns = elapsed_ns(kernel_start, end);
  report.total_ns = elapsed_ns(start, end);
  return report;
}

} // namespace gts
