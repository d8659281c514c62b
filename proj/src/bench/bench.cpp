#include "gts/bench.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace gts {

namespace detail {
extern const std::string_view kHdiffSource;
extern const std::string_view kVadvSource;
} // namespace detail

const std::vector<KernelInfo> &builtin_kernels() {
  static const std::vector<KernelInfo> kernels = {
      {"hdiff", "hdiff.gts", detail::kHdiffSource, {{"LIM", 0.0}}},
      {"vadv", "vadv.gts", detail::kVadvSource, {}},
  };
  return kernels;
}

const KernelInfo &find_kernel(std::string_view name) {
  for (const auto &k : builtin_kernels())
    if (k.name == name)
      return k;
  throw Error(ErrorCode::UnknownStencil,
              "unknown kernel '" + std::string(name) + "' (available: hdiff, vadv)");
}

SourceProgram kernel_program(const KernelInfo &kernel) {
  return {std::string(kernel.source), kernel.file_name};
}

// ---------------------------------------------------------------------------
// Field helpers
// ---------------------------------------------------------------------------

void fill_random(FieldStorage &f, std::uint64_t seed, double lo, double hi) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  const Index3 &s = f.shape();
  for (long i = 0; i < s[0]; ++i)
    for (long j = 0; j < s[1]; ++j)
      for (long k = 0; k < s[2]; ++k)
        f.set(i, j, k, dist(rng));
}

double relative_difference(double a, double b) {
  if (std::isnan(a) || std::isnan(b))
    return std::isnan(a) && std::isnan(b) ? 0.0 : INFINITY;
  if (a == b)
    return 0.0;
  return std::fabs(a - b) / std::max(std::fabs(a), std::fabs(b));
}

double max_relative_difference(const FieldStorage &a, const FieldStorage &b,
                               const Index3 &domain) {
  double worst = 0.0;
  const Index3 &oa = a.origin();
  const Index3 &ob = b.origin();
  for (long i = 0; i < domain[0]; ++i)
    for (long j = 0; j < domain[1]; ++j)
      for (long k = 0; k < domain[2]; ++k)
        worst = std::max(worst, relative_difference(a.get(oa[0] + i, oa[1] + j, oa[2] + k),
                                                    b.get(ob[0] + i, ob[1] + j, ob[2] + k)));
  return worst;
}

InvocationArgs StencilInputs::arguments() {
  InvocationArgs args;
  for (auto &[name, field] : fields)
    args.fields[name] = &field;
  args.scalars = scalars;
  args.domain = domain;
  args.num_threads = num_threads;
  return args;
}

StencilInputs make_random_inputs(const CompiledStencil &stencil, const Index3 &domain,
                                 std::uint64_t seed) {
  StencilInputs inputs;
  inputs.domain = domain;
  const LayoutSpec layout = default_layout(stencil.backend());
  std::uint64_t stream = seed;
  for (const auto &decl : stencil.fields()) {
    Extent e = stencil.field_extent(decl.name);
    Index3 halo;
    for (int d = 0; d < 3; ++d)
      halo[d] = std::max(-e.lo[d], e.hi[d]);
    FieldStorage f = FieldStorage::allocate(decl.dtype, domain, halo, layout);
    fill_random(f, stream++);
    inputs.fields.emplace(decl.name, std::move(f));
  }
  std::mt19937_64 rng(stream);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  for (const auto &decl : stencil.scalars())
    inputs.scalars[decl.name] = dist(rng);
  return inputs;
}

StencilInputs make_kernel_inputs(std::string_view kernel, const CompiledStencil &stencil,
                                 const Index3 &domain, std::uint64_t seed) {
  StencilInputs inputs = make_random_inputs(stencil, domain, seed);
  if (kernel == "hdiff") {
    inputs.scalars["coeff"] = 0.025;
  } else if (kernel == "vadv") {
    FieldStorage &a = inputs.fields.at("a");
    FieldStorage &b = inputs.fields.at("b");
    FieldStorage &c = inputs.fields.at("c");
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
    std::uniform_real_distribution<double> margin(0.5, 1.5);
    const Index3 &s = b.shape();
    for (long i = 0; i < s[0]; ++i)
      for (long j = 0; j < s[1]; ++j)
        for (long k = 0; k < s[2]; ++k)
          b.set(i, j, k, std::fabs(a.get(i, j, k)) + std::fabs(c.get(i, j, k)) + margin(rng));
  }
  return inputs;
}

// ---------------------------------------------------------------------------
// Oracles
// ---------------------------------------------------------------------------

void hdiff_reference(const FieldStorage &inp, FieldStorage &out, double coeff,
                     const Index3 &domain, double lim) {
  const Index3 &oi = inp.origin();
  const Index3 &oo = out.origin();
  auto in = [&](long i, long j, long k) { return inp.get(oi[0] + i, oi[1] + j, oi[2] + k); };
  auto lap = [&](long i, long j, long k) {
    return 4.0 * in(i, j, k) -
           (in(i - 1, j, k) + in(i + 1, j, k) + in(i, j - 1, k) + in(i, j + 1, k));
  };
  auto flx = [&](long i, long j, long k) {
    double f = lap(i + 1, j, k) - lap(i, j, k);
    return f * (in(i + 1, j, k) - in(i, j, k)) > lim ? 0.0 : f;
  };
  auto fly = [&](long i, long j, long k) {
    double f = lap(i, j + 1, k) - lap(i, j, k);
    return f * (in(i, j + 1, k) - in(i, j, k)) > lim ? 0.0 : f;
  };
  for (long i = 0; i < domain[0]; ++i)
    for (long j = 0; j < domain[1]; ++j)
      for (long k = 0; k < domain[2]; ++k) {
        double v = in(i, j, k) - coeff * (flx(i, j, k) - flx(i - 1, j, k) + fly(i, j, k) -
                                          fly(i, j - 1, k));
        out.set(oo[0] + i, oo[1] + j, oo[2] + k, v);
      }
}

void vadv_reference(const FieldStorage &a, const FieldStorage &b, const FieldStorage &c,
                    const FieldStorage &d, FieldStorage &x, const Index3 &domain) {
  const long n = domain[2];
  std::vector<double> m(static_cast<std::size_t>(n * n));
  std::vector<double> rhs(static_cast<std::size_t>(n));
  auto at = [&](long r, long col) -> double & { return m[static_cast<std::size_t>(r * n + col)]; };
  auto get = [](const FieldStorage &f, long i, long j, long k) {
    return f.get(f.origin()[0] + i, f.origin()[1] + j, f.origin()[2] + k);
  };
  for (long i = 0; i < domain[0]; ++i)
    for (long j = 0; j < domain[1]; ++j) {
      std::fill(m.begin(), m.end(), 0.0);
      for (long k = 0; k < n; ++k) {
        if (k > 0)
          at(k, k - 1) = get(a, i, j, k);
        at(k, k) = get(b, i, j, k);
        if (k + 1 < n)
          at(k, k + 1) = get(c, i, j, k);
        rhs[static_cast<std::size_t>(k)] = get(d, i, j, k);
      }
      for (long col = 0; col < n; ++col) {
        long pivot = col;
        for (long r = col + 1; r < n; ++r)
          if (std::fabs(at(r, col)) > std::fabs(at(pivot, col)))
            pivot = r;
        if (pivot != col) {
          for (long q = 0; q < n; ++q)
            std::swap(at(col, q), at(pivot, q));
          std::swap(rhs[static_cast<std::size_t>(col)], rhs[static_cast<std::size_t>(pivot)]);
        }
        for (long r = col + 1; r < n; ++r) {
          double factor = at(r, col) / at(col, col);
          if (factor == 0.0)
            continue;
          for (long q = col; q < n; ++q)
            at(r, q) -= factor * at(col, q);
          rhs[static_cast<std::size_t>(r)] -= factor * rhs[static_cast<std::size_t>(col)];
        }
      }
      for (long r = n - 1; r >= 0; --r) {
        double sum = rhs[static_cast<std::size_t>(r)];
        for (long q = r + 1; q < n; ++q)
          sum -= at(r, q) * rhs[static_cast<std::size_t>(q)];
        rhs[static_cast<std::size_t>(r)] = sum / at(r, r);
      }
      for (long k = 0; k < n; ++k)
        x.set(x.origin()[0] + i, x.origin()[1] + j, x.origin()[2] + k,
              rhs[static_cast<std::size_t>(k)]);
    }
}

// ---------------------------------------------------------------------------
// Differential runs
// ---------------------------------------------------------------------------

std::vector<DiffCase> run_diff(const std::vector<CompiledStencil> &stencils,
                               const std::vector<Index3> &domains, std::uint64_t seed) {
  std::vector<DiffCase> cases;
  if (stencils.size() < 2)
    return cases;
  for (const auto &domain : domains) {
    std::vector<StencilInputs> results;
    for (const auto &stencil : stencils) {
      StencilInputs inputs = make_random_inputs(stencil, domain, seed);
      InvocationArgs args = inputs.arguments();
      invoke(stencil, args);
      results.push_back(std::move(inputs));
    }
    for (std::size_t s = 1; s < stencils.size(); ++s) {
      DiffCase dc;
      dc.domain = domain;
      dc.reference_backend = std::string(to_string(stencils[0].backend()));
      dc.backend = std::string(to_string(stencils[s].backend()));
      for (const auto &decl : stencils[0].fields())
        dc.fields.push_back(
            {decl.name, max_relative_difference(results[0].fields.at(decl.name),
                                                results[s].fields.at(decl.name), domain)});
      cases.push_back(std::move(dc));
    }
  }
  return cases;
}

// ---------------------------------------------------------------------------
// Benchmarks
// ---------------------------------------------------------------------------

std::int64_t median(std::vector<std::int64_t> values) {
  if (values.empty())
    return 0;
  std::sort(values.begin(), values.end());
  std::size_t mid = values.size() / 2;
  if (values.size() % 2 == 1)
    return values[mid];
  return (values[mid - 1] + values[mid]) / 2;
}

BenchmarkResult benchmark(const std::string &kernel, const CompiledStencil &stencil,
                          StencilInputs &inputs, int reps) {
  InvocationArgs args = inputs.arguments();
  for (int w = 0; w < kWarmupCalls; ++w)
    invoke(stencil, args);
  std::vector<std::int64_t> kernel_ns, total_ns;
  for (int r = 0; r < reps; ++r) {
    ExecutionReport report = invoke(stencil, args);
    kernel_ns.push_back(report.kernel_ns);
    total_ns.push_back(report.total_ns);
  }
  BenchmarkResult result;
  result.kernel = kernel;
  result.backend = stencil.backend();
  result.domain = inputs.domain;
  result.repetitions = reps;
  result.kernel_ns_median = median(kernel_ns);
  result.kernel_ns_min =
      kernel_ns.empty() ? 0 : *std::min_element(kernel_ns.begin(), kernel_ns.end());
  result.total_ns_median = median(total_ns);
  result.validation = stencil.validation();
  return result;
}

std::string csv_header() {
  return "kernel,backend,ni,nj,nk,reps,kernel_ns_median,total_ns_median,validate";
}

std::string csv_row(const BenchmarkResult &r) {
  std::ostringstream os;
  os << r.kernel << "," << to_string(r.backend) << "," << r.domain[0] << "," << r.domain[1]
     << "," << r.domain[2] << "," << r.repetitions << "," << r.kernel_ns_median << ","
     << r.total_ns_median << "," << (r.validation == ValidationPolicy::full ? "full" : "skip");
  return os.str();
}

} // namespace gts
