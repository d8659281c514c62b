#include "gts/cli.hpp"

#include "gts/bench.hpp"
#include "gts/gtsf.hpp"
#include "gts/runtime.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <fstream>
#include <iostream>
#include <optional>

namespace gts::cli {

namespace {

/// Command-line mistakes detected after CLI11 parsing.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

long parse_long(std::string_view text, std::string_view what) {
  long value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw UsageError("invalid " + std::string(what) + " '" + std::string(text) + "'");
  return value;
}

double parse_double(std::string_view text, std::string_view what) {
  double value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw UsageError("invalid " + std::string(what) + " '" + std::string(text) + "'");
  return value;
}

std::vector<std::string> split(std::string_view text, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    std::size_t end = text.find(sep, start);
    parts.emplace_back(text.substr(start, end - start));
    if (end == std::string_view::npos)
      break;
    start = end + 1;
  }
  return parts;
}

Index3 parse_triple(std::string_view text, std::string_view what) {
  auto parts = split(text, ',');
  if (parts.size() != 3)
    throw UsageError(std::string(what) + " must be three comma-separated integers, got '" +
                     std::string(text) + "'");
  return {parse_long(parts[0], what), parse_long(parts[1], what), parse_long(parts[2], what)};
}

/// `N` (cubic) or `IxJxK`.
Index3 parse_size(std::string_view text, std::optional<long> nk) {
  auto parts = split(text, 'x');
  if (parts.size() == 3)
    return {parse_long(parts[0], "size"), parse_long(parts[1], "size"),
            parse_long(parts[2], "size")};
  if (parts.size() != 1)
    throw UsageError("size must be N or IxJxK, got '" + std::string(text) + "'");
  long n = parse_long(parts[0], "size");
  return {n, n, nk ? *nk : n};
}

std::pair<std::string, std::string> parse_binding(std::string_view text, std::string_view what) {
  auto eq = text.find('=');
  if (eq == std::string_view::npos || eq == 0)
    throw UsageError(std::string(what) + " must have the form NAME=VALUE, got '" +
                     std::string(text) + "'");
  return {std::string(text.substr(0, eq)), std::string(text.substr(eq + 1))};
}

ExternalsBinding parse_externals(const std::vector<std::string> &items) {
  ExternalsBinding binding;
  for (const auto &item : items)
    parse_external_assignment(item, binding);
  return binding;
}

std::vector<BackendId> parse_backend_list(const std::string &text) {
  std::vector<BackendId> ids;
  for (const auto &name : split(text, ','))
    ids.push_back(parse_backend(name));
  return ids;
}

std::string resolve_stencil_name(const SourceProgram &src, const std::string &requested) {
  if (!requested.empty())
    return requested;
  ParsedProgram program = parse_program(src);
  if (program.stencils.size() == 1)
    return program.stencils.front().name;
  std::string names;
  for (const auto &s : program.stencils)
    names += (names.empty() ? "" : ", ") + s.name;
  throw UsageError("--stencil is required when the file defines " +
                   std::to_string(program.stencils.size()) + " stencils (" + names + ")");
}

void print_warnings(const CompiledStencil &stencil, const std::string &file, std::ostream &err) {
  for (const auto &w : stencil.warnings())
    err << render(w, file) << "\n";
}

std::string dims(const Index3 &d) {
  return std::to_string(d[0]) + "x" + std::to_string(d[1]) + "x" + std::to_string(d[2]);
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

struct CompileCommand {
  std::string file;
  std::string stencil;
  std::string backend = "debug";
  std::vector<std::string> externals;
  std::string dump_ir;
  std::string emit_source;
};

int run_compile(const CompileCommand &cmd, std::ostream &out, std::ostream &err) {
  BackendId backend = parse_backend(cmd.backend);
  if (!cmd.emit_source.empty() && backend != BackendId::gen)
    throw UsageError("--emit-source requires --backend gen");
  SourceProgram src = SourceProgram::from_file(cmd.file);
  CompiledStencil stencil = compile_stencil(src, resolve_stencil_name(src, cmd.stencil), backend,
                                            parse_externals(cmd.externals));
  print_warnings(stencil, src.path, err);
  if (cmd.dump_ir == "definition")
    out << dump_ir(stencil.definition());
  else if (cmd.dump_ir == "implementation")
    out << dump_ir(stencil.implementation());
  if (backend == BackendId::gen) {
    out << "cache: " << (stencil.cache_hit() ? "hit" : "miss") << "\n";
    if (!cmd.emit_source.empty()) {
      std::ofstream file(cmd.emit_source, std::ios::binary | std::ios::trunc);
      file << stencil.generated_source();
      if (!file)
        throw Error(ErrorCode::IoError, "cannot write '" + cmd.emit_source + "'");
    }
  }
  if (cmd.dump_ir.empty())
    out << "compiled " << stencil.name() << " backend " << to_string(backend) << " fingerprint "
        << stencil.fingerprint().hex() << "\n";
  return kExitOk;
}

struct RunCommand {
  std::string file;
  std::string stencil;
  std::string backend = "debug";
  std::vector<std::string> externals;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::vector<std::string> scalars;
  std::string domain;
  std::string origin;
  bool no_validate = false;
  int threads = 0;
};

int run_run(const RunCommand &cmd, std::ostream &out, std::ostream &err) {
  BackendId backend = parse_backend(cmd.backend);
  SourceProgram src = SourceProgram::from_file(cmd.file);
  CompiledStencil stencil = compile_stencil(src, resolve_stencil_name(src, cmd.stencil), backend,
                                            parse_externals(cmd.externals));
  print_warnings(stencil, src.path, err);
  if (cmd.no_validate)
    stencil = stencil.with_validation(ValidationPolicy::skip);

  const LayoutSpec layout = default_layout(backend);
  std::map<std::string, FieldStorage> fields;
  for (const auto &item : cmd.inputs) {
    auto [name, path] = parse_binding(item, "--in");
    fields[name] = load_gtsf(path, layout);
  }
  std::map<std::string, std::string> output_paths;
  for (const auto &item : cmd.outputs) {
    auto [name, path] = parse_binding(item, "--out");
    output_paths[name] = path;
  }
  // Output-only fields take the shape and origin of the first input field.
  for (const auto &decl : stencil.fields()) {
    if (fields.count(decl.name))
      continue;
    if (!output_paths.count(decl.name) || fields.empty())
      throw Error(ErrorCode::MissingArgument,
                  "field '" + decl.name + "' needs --in " + decl.name + "=PATH");
    const FieldStorage &like = fields.begin()->second;
    fields[decl.name] = FieldStorage::with_shape(decl.dtype, like.shape(), like.origin(), layout);
  }

  InvocationArgs args;
  for (auto &[name, f] : fields)
    args.fields[name] = &f;
  for (const auto &item : cmd.scalars) {
    auto [name, value] = parse_binding(item, "--scalar");
    args.scalars[name] = parse_double(value, "scalar value");
  }
  if (!cmd.domain.empty())
    args.domain = parse_triple(cmd.domain, "--domain");
  if (!cmd.origin.empty())
    args.origin = parse_triple(cmd.origin, "--origin");
  args.num_threads = cmd.threads;

  ExecutionReport report;
  ResolvedCall resolved;
  try {
    if (!cmd.no_validate)
      resolved = resolve_domain_origin(stencil, args);
    report = invoke(stencil, args);
  } catch (const CompileError &) {
    throw;
  } catch (const Error &e) {
    err << "error[" << to_string(e.code()) << "]: " << e.what() << "\n";
    return kExitRuntime;
  }
  for (const auto &[name, path] : output_paths) {
    auto it = fields.find(name);
    if (it == fields.end())
      throw UsageError("--out names unknown field '" + name + "'");
    save_gtsf(it->second, path);
  }
  nlohmann::json line = {
      {"stencil", stencil.name()},
      {"backend", to_string(backend)},
      {"validate", cmd.no_validate ? "skip" : "full"},
      {"total_ns", report.total_ns},
      {"validation_ns", report.validation_ns},
      {"kernel_ns", report.kernel_ns},
  };
  if (!cmd.no_validate)
    line["domain"] = resolved.domain;
  out << line.dump() << "\n";
  return kExitOk;
}

struct DiffCommand {
  std::string file;
  std::string stencil;
  std::string backends;
  std::vector<std::string> externals;
  std::string sizes = "16";
  std::uint64_t seed = 1;
  double tol = 1e-13;
};

int run_diff_command(const DiffCommand &cmd, std::ostream &out, std::ostream &err) {
  std::vector<BackendId> backends = parse_backend_list(cmd.backends);
  if (backends.size() < 2)
    throw UsageError("--backends needs at least two backends");
  std::vector<Index3> domains;
  for (const auto &s : split(cmd.sizes, ','))
    domains.push_back(parse_size(s, std::nullopt));
  SourceProgram src = SourceProgram::from_file(cmd.file);
  std::string name = resolve_stencil_name(src, cmd.stencil);
  ExternalsBinding externals = parse_externals(cmd.externals);
  std::vector<CompiledStencil> stencils;
  for (BackendId id : backends)
    stencils.push_back(compile_stencil(src, name, id, externals));
  print_warnings(stencils.front(), src.path, err);

  bool ok = true;
  for (const auto &c : run_diff(stencils, domains, cmd.seed)) {
    for (const auto &f : c.fields) {
      bool pass = f.max_relative <= cmd.tol;
      ok = ok && pass;
      out << dims(c.domain) << " " << c.backend << " vs " << c.reference_backend << " field "
          << f.field << " max_rel " << f.max_relative << (pass ? " ok" : " MISMATCH") << "\n";
      if (!pass)
        err << "mismatch: field '" << f.field << "' differs between " << c.backend << " and "
            << c.reference_backend << " at " << dims(c.domain) << " (max relative difference "
            << f.max_relative << " > " << cmd.tol << ")\n";
    }
  }
  return ok ? kExitOk : kExitDiagnostics;
}

struct BenchCommand {
  std::string kernels = "hdiff,vadv";
  std::string backends = "debug,vec,gen";
  std::string sizes = "32,64,128,256";
  long nk = 80;
  int reps = 20;
  std::string csv;
  bool no_validate = false;
  int threads = 0;
  std::uint64_t seed = 1;
};

int run_bench(const BenchCommand &cmd, std::ostream &out, std::ostream &err) {
  if (cmd.reps < kMinRepetitions)
    throw UsageError("--reps must be at least " + std::to_string(kMinRepetitions));
  if (cmd.nk < 1)
    throw UsageError("--nk must be positive");
  std::vector<BackendId> backends = parse_backend_list(cmd.backends);
  std::vector<Index3> domains;
  for (const auto &s : split(cmd.sizes, ','))
    domains.push_back(parse_size(s, cmd.nk));

  std::ofstream csv_file;
  std::ostream *csv = &out;
  if (!cmd.csv.empty()) {
    csv_file.open(cmd.csv, std::ios::trunc);
    if (!csv_file)
      throw Error(ErrorCode::IoError, "cannot write '" + cmd.csv + "'");
    csv = &csv_file;
  }
  *csv << csv_header() << "\n";
  for (const auto &kernel_name : split(cmd.kernels, ',')) {
    const KernelInfo &kernel = find_kernel(kernel_name);
    for (BackendId id : backends) {
      CompiledStencil stencil =
          compile_stencil(kernel_program(kernel), kernel.name, id, kernel.default_externals);
      if (cmd.no_validate)
        stencil = stencil.with_validation(ValidationPolicy::skip);
      for (const auto &domain : domains) {
        StencilInputs inputs = make_kernel_inputs(kernel.name, stencil, domain, cmd.seed);
        inputs.num_threads = cmd.threads;
        BenchmarkResult result = benchmark(kernel.name, stencil, inputs, cmd.reps);
        *csv << csv_row(result) << "\n";
        csv->flush();
        if (csv != &out)
          err << csv_row(result) << "\n";
      }
    }
  }
  return kExitOk;
}

} // namespace

int main(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
  CLI::App app{"Stencil compiler and benchmark driver", "gts"};
  app.require_subcommand(1);

  CompileCommand compile;
  auto *c = app.add_subcommand("compile", "Compile a stencil and optionally dump its IR");
  c->add_option("file", compile.file, "Stencil source (.gts)")->required();
  c->add_option("--stencil", compile.stencil, "Stencil name (optional for single-stencil files)");
  c->add_option("--backend", compile.backend, "debug, vec or gen");
  c->add_option("--externals", compile.externals, "Compile-time constants NAME=VALUE");
  c->add_option("--dump-ir", compile.dump_ir, "Print the IR")
      ->check(CLI::IsMember({"definition", "implementation"}));
  c->add_option("--emit-source", compile.emit_source, "Write the generated source (gen only)");

  RunCommand run;
  auto *r = app.add_subcommand("run", "Run a stencil on GTSF fields");
  r->add_option("file", run.file, "Stencil source (.gts)")->required();
  r->add_option("--stencil", run.stencil, "Stencil name");
  r->add_option("--backend", run.backend, "debug, vec or gen");
  r->add_option("--externals", run.externals, "Compile-time constants NAME=VALUE");
  r->add_option("--in", run.inputs, "Input field NAME=PATH.gtsf");
  r->add_option("--out", run.outputs, "Field to write after the run NAME=PATH.gtsf");
  r->add_option("--scalar", run.scalars, "Scalar argument NAME=VALUE");
  r->add_option("--domain", run.domain, "Compute domain i,j,k");
  r->add_option("--origin", run.origin, "Origin i,j,k applied to every field");
  r->add_flag("--no-validate", run.no_validate, "Skip run-time argument checks");
  r->add_option("--threads", run.threads, "Worker threads (gen)");

  DiffCommand diff;
  auto *d = app.add_subcommand("diff", "Compare backends on identical random inputs");
  d->add_option("file", diff.file, "Stencil source (.gts)")->required();
  d->add_option("--stencil", diff.stencil, "Stencil name");
  d->add_option("--backends", diff.backends, "Comma-separated backends (at least two)")
      ->required();
  d->add_option("--externals", diff.externals, "Compile-time constants NAME=VALUE");
  d->add_option("--sizes", diff.sizes, "Comma-separated sizes, N or IxJxK");
  d->add_option("--seed", diff.seed, "Random seed");
  d->add_option("--tol", diff.tol, "Maximum relative difference");

  BenchCommand bench;
  auto *b = app.add_subcommand("bench", "Time the committed kernels and print CSV");
  b->add_option("--kernels", bench.kernels, "Comma-separated kernels");
  b->add_option("--backends", bench.backends, "Comma-separated backends");
  b->add_option("--sizes", bench.sizes, "Comma-separated horizontal sizes, N or IxJxK");
  b->add_option("--nk", bench.nk, "Vertical levels for N sizes");
  b->add_option("--reps", bench.reps, "Timed repetitions (at least 5)");
  b->add_option("--csv", bench.csv, "Write CSV to this path instead of stdout");
  b->add_flag("--no-validate", bench.no_validate, "Skip run-time argument checks");
  b->add_option("--threads", bench.threads, "Worker threads (gen)");
  b->add_option("--seed", bench.seed, "Random seed");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError &e) {
    int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (c->parsed())
      return run_compile(compile, out, err);
    if (r->parsed())
      return run_run(run, out, err);
    if (d->parsed())
      return run_diff_command(diff, out, err);
    if (b->parsed())
      return run_bench(bench, out, err);
  } catch (const UsageError &e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const CompileError &e) {
    std::string text = e.rendered();
    err << text << (text.empty() || text.back() != '\n' ? "\n" : "");
    return kExitDiagnostics;
  } catch (const Error &e) {
    err << "error[" << to_string(e.code()) << "]: " << e.what() << "\n";
    if (e.code() == ErrorCode::UnknownBackend)
      return kExitUsage;
    switch (e.code()) {
    case ErrorCode::DomainTooSmall:
    case ErrorCode::KBelowMinimum:
    case ErrorCode::OutOfBounds:
    case ErrorCode::LayoutMismatch:
    case ErrorCode::DTypeMismatch:
    case ErrorCode::MissingArgument:
    case ErrorCode::UnexpectedArgument:
    case ErrorCode::AliasedFields:
      return kExitRuntime;
    default:
      return kExitDiagnostics;
    }
  }
  return kExitUsage;
}

} // namespace gts::cli
