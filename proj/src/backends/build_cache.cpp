#include "gts/gen.hpp"

#include <json.hpp>

#include <dlfcn.h>
#include <unistd.h>

#include <array>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <random>
#include <sstream>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace gts {

namespace {

constexpr std::string_view kCompileFlags =
    "-std=c++17 -O3 -march=native -ffp-contract=off -fPIC -shared -fopenmp";

std::atomic<std::uint64_t> g_compiler_invocations{0};

std::string shell_quote(const std::string &s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'')
      out += "'\\''";
    else
      out += c;
  }
  return out + "'";
}

/// Runs `command` through the shell; returns the exit status and stdout.
std::pair<int, std::string> run_capture(const std::string &command) {
  std::string output;
  FILE *pipe = popen(command.c_str(), "r");
  if (!pipe)
    return {-1, output};
  std::array<char, 4096> buffer;
  std::size_t n;
  while ((n = std::fread(buffer.data(), 1, buffer.size(), pipe)) > 0)
    output.append(buffer.data(), n);
  int status = pclose(pipe);
  int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return {code, output};
}

std::string read_file(const fs::path &path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const fs::path &path, const std::string &content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
  if (!out)
    throw Error(ErrorCode::IoError, "cannot write '" + path.string() + "'");
}

std::string unique_suffix() {
  static std::atomic<unsigned> counter{0};
  std::random_device rd;
  std::ostringstream os;
  os << ::getpid() << "-" << counter++ << "-" << std::hex << rd();
  return os.str();
}

struct Loaded {
  std::shared_ptr<void> handle;
  GenTrampoline call = nullptr;
};

/// Opens `so` and resolves `symbol`. Returns an empty handle when the
/// library cannot be loaded; throws SymbolNotFound when the symbol is absent.
/// Modules stay mapped until exit: unloading the last one would also unload
/// the OpenMP runtime underneath its idle worker threads.
Loaded load(const fs::path &so, const std::string &symbol) {
  void *raw = ::dlopen(so.c_str(), RTLD_NOW | RTLD_LOCAL | RTLD_NODELETE);
  if (!raw)
    return {};
  std::shared_ptr<void> handle(raw, [](void *h) { ::dlclose(h); });
  void *fn = ::dlsym(raw, symbol.c_str());
  if (!fn)
    throw Error(ErrorCode::SymbolNotFound,
                "symbol '" + symbol + "' not found in '" + so.string() + "'");
  return {handle, reinterpret_cast<GenTrampoline>(fn)};
}

/// Checks an installed entry; returns an empty result when it is corrupt.
Loaded verify_and_load(const fs::path &dir, const std::string &symbol) {
  try {
    auto meta = nlohmann::json::parse(read_file(dir / "meta.json"));
    std::string so_bytes = read_file(dir / "stencil.so");
    if (so_bytes.empty() || meta.at("so_sha256").get<std::string>() != sha256(so_bytes).hex())
      return {};
    if (meta.at("symbol").get<std::string>() != symbol)
      return {};
  } catch (const nlohmann::json::exception &) {
    return {};
  }
  return load(dir / "stencil.so", symbol);
}

} // namespace

std::string Toolchain::identity() const { return compiler + "|" + version + "|" + flags; }

Toolchain detect_toolchain() {
  static std::mutex mutex;
  static std::map<std::string, Toolchain> probed;
  const char *env = std::getenv("GTS_CC");
  std::string compiler = env && *env ? env : "c++";
  std::lock_guard lock(mutex);
  if (auto it = probed.find(compiler); it != probed.end())
    return it->second;
  auto [code, output] = run_capture(compiler + " --version 2>/dev/null");
  if (code != 0 || output.empty())
    throw Error(ErrorCode::ToolchainMissing,
                "cannot run C++ compiler '" + compiler + "' (set GTS_CC)");
  Toolchain tc;
  tc.compiler = compiler;
  tc.version = output.substr(0, output.find('\n'));
  tc.flags = std::string(kCompileFlags);
  probed[compiler] = tc;
  return tc;
}

std::string default_cache_root() {
  if (const char *dir = std::getenv("GTS_CACHE_DIR"); dir && *dir)
    return dir;
  if (const char *xdg = std::getenv("XDG_CACHE_HOME"); xdg && *xdg)
    return (fs::path(xdg) / "stencil-forge").string();
  if (const char *home = std::getenv("HOME"); home && *home)
    return (fs::path(home) / ".cache" / "stencil-forge").string();
  return (fs::temp_directory_path() / "stencil-forge").string();
}

std::string BuildCache::entry_dir(const Fingerprint &fp) const {
  return (fs::path(root_) / fp.hex()).string();
}

std::uint64_t compiler_invocation_count() { return g_compiler_invocations.load(); }

GenModule compile_and_load(const std::string &source, const Fingerprint &fp,
                           const std::string &symbol, const BuildCache &cache,
                           const Toolchain &toolchain) {
  const fs::path entry = cache.entry_dir(fp);
  GenModule module;
  module.shared_object = (entry / "stencil.so").string();
  module.source_path = (entry / "stencil.cpp").string();

  std::error_code ec;
  if (fs::exists(entry / "meta.json", ec)) {
    Loaded loaded = verify_and_load(entry, symbol);
    if (loaded.handle) {
      module.handle = loaded.handle;
      module.call = loaded.call;
      module.cache_hit = true;
      return module;
    }
    module.recovered_corrupt_entry = true;
    fs::remove_all(entry, ec);
  } else if (fs::exists(entry, ec)) {
    // Incomplete entry without metadata.
    module.recovered_corrupt_entry = true;
    fs::remove_all(entry, ec);
  }

  fs::create_directories(cache.root(), ec);
  if (ec)
    throw Error(ErrorCode::IoError, "cannot create cache directory '" + cache.root() +
                                        "': " + ec.message());
  const fs::path staging = fs::path(cache.root()) / (".build-" + unique_suffix());
  fs::create_directories(staging, ec);
  if (ec)
    throw Error(ErrorCode::IoError, "cannot create '" + staging.string() + "'");

  const fs::path src = staging / "stencil.cpp";
  const fs::path so = staging / "stencil.so";
  const fs::path log = staging / "compile.log";
  write_file(src, source);
  std::string command = toolchain.compiler + " " + toolchain.flags + " -o " +
                        shell_quote(so.string()) + " " + shell_quote(src.string()) + " > " +
                        shell_quote(log.string()) + " 2>&1";
  ++g_compiler_invocations;
  int status = std::system(command.c_str());
  if (status == -1 || !WIFEXITED(status) || WEXITSTATUS(status) == 127) {
    fs::remove_all(staging, ec);
    throw Error(ErrorCode::ToolchainMissing, "cannot run compiler '" + toolchain.compiler + "'");
  }
  if (WEXITSTATUS(status) != 0) {
    std::string diagnostics = read_file(log);
    fs::remove_all(staging, ec);
    throw Error(ErrorCode::CompileFailed, "generated code failed to compile:\n" + diagnostics);
  }

  nlohmann::json meta = {
      {"fingerprint", fp.hex()},
      {"symbol", symbol},
      {"toolchain", toolchain.identity()},
      {"so_sha256", sha256(read_file(so)).hex()},
      {"created_unix",
       std::chrono::duration_cast<std::chrono::seconds>(
           std::chrono::system_clock::now().time_since_epoch())
           .count()},
  };
  write_file(staging / "meta.json", meta.dump(2) + "\n");
  fs::remove(log, ec);

  fs::rename(staging, entry, ec);
  if (ec) {
    // Another writer installed the entry first; use theirs.
    fs::remove_all(staging, ec);
  }
  Loaded loaded = verify_and_load(entry, symbol);
  if (!loaded.handle)
    throw Error(ErrorCode::CacheCorrupt,
                "freshly built cache entry '" + entry.string() + "' cannot be loaded: " +
                    std::string(::dlerror() ? ::dlerror() : "verification failed"));
  module.handle = loaded.handle;
  module.call = loaded.call;
  return module;
}

void run_gen(const GenModule &module, const StencilImplementation &impl,
             const CallArguments &args) {
  if (args.fields.size() != impl.api_fields.size() ||
      args.scalars.size() != impl.api_scalars.size())
    throw Error(ErrorCode::MissingArgument, "argument count does not match signature");
  long domain[3] = {args.domain[0], args.domain[1], args.domain[2]};
  std::vector<void *> pointers;
  std::vector<long> ints;
  pointers.reserve(args.fields.size());
  ints.reserve(args.fields.size() * 6);
  for (const auto &f : args.fields) {
    pointers.push_back(f.base);
    ints.insert(ints.end(), {f.strides[0], f.strides[1], f.strides[2], f.origin[0],
                             f.origin[1], f.origin[2]});
  }
  module.call(domain, pointers.data(), ints.data(), args.scalars.data(), args.num_threads);
}

} // namespace gts
