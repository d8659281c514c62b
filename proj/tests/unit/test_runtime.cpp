#include "gts/bench.hpp"
#include "gts/runtime.hpp"
#include "random_stencil.hpp"
#include "test_paths.hpp"

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <random>

using namespace gts;
using gts::testing::data_path;
using gts::testing::kernel_path;
using gts::testing::read_text;
using gts::testing::source;

namespace {

constexpr BackendId kBackends[] = {BackendId::debug, BackendId::vec, BackendId::gen};

CompiledStencil laplacian(BackendId backend = BackendId::debug) {
  return compile_stencil(SourceProgram::from_file(data_path("laplacian.gts")), "laplacian",
                         backend);
}

CompiledStencil copy(BackendId backend = BackendId::debug) {
  return compile_stencil(SourceProgram::from_file(data_path("copy.gts")), "copy", backend);
}

CompiledStencil hdiff(BackendId backend) {
  return compile_stencil(SourceProgram::from_file(kernel_path("hdiff.gts")), "hdiff", backend,
                         {{"LIM", 0.0}});
}

ErrorCode error_code(const std::function<void()> &fn, std::string *message = nullptr) {
  try {
    fn();
  } catch (const Error &e) {
    if (message)
      *message = e.what();
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::SyntaxError;
}

bool bitwise_equal(const FieldStorage &a, const FieldStorage &b) {
  if (a.shape() != b.shape() || a.dtype() != b.dtype())
    return false;
  const auto &s = a.shape();
  for (long i = 0; i < s[0]; ++i)
    for (long j = 0; j < s[1]; ++j)
      for (long k = 0; k < s[2]; ++k)
        if (std::memcmp(a.element_ptr(i, j, k), b.element_ptr(i, j, k), a.element_size()) != 0)
          return false;
  return true;
}

} // namespace

TEST_CASE("compile_stencil") {
  CompiledStencil c = copy();
  CHECK(c.name() == "copy");
  CHECK(c.backend() == BackendId::debug);
  CHECK(c.field_extent("a").is_zero());
  CHECK(c.field_extent("b").is_zero());
  CHECK(c.k_min() == 1);
  CHECK(c.validation() == ValidationPolicy::full);
  CHECK(c.with_validation(ValidationPolicy::skip).validation() == ValidationPolicy::skip);

  try {
    compile_stencil(SourceProgram::from_file(data_path("self_assign.gts")), "shift",
                    BackendId::debug);
    FAIL("expected a compile error");
  } catch (const CompileError &e) {
    REQUIRE_FALSE(e.diagnostics().empty());
    CHECK(e.diagnostics()[0].code == ErrorCode::SelfAssignParallel);
    CHECK(e.rendered().find("self_assign.gts:") != std::string::npos);
  }
}

TEST_CASE("resolve_domain_origin: laplacian example") {
  CompiledStencil s = laplacian();
  FieldStorage inp = FieldStorage::allocate(DType::f64, {8, 8, 5}, {1, 1, 0});
  FieldStorage out = FieldStorage::allocate(DType::f64, {8, 8, 5}, {0, 0, 0});
  REQUIRE(inp.shape() == Index3{10, 10, 5});
  InvocationArgs args;
  args.fields = {{"inp", &inp}, {"out", &out}};
  ResolvedCall r = resolve_domain_origin(s, args);
  // min over fields of shape - origin - hi: inp 10-1-1 = 8, out 8-0-0 = 8.
  CHECK(r.domain == Index3{8, 8, 5});
  CHECK(r.origins.at("inp") == Index3{1, 1, 0});
  CHECK(r.origins.at("out") == Index3{0, 0, 0});

  SUBCASE("a poisoned halo outside the extent never reaches the output") {
    FieldStorage poisoned = FieldStorage::allocate(DType::f64, {8, 8, 5}, {2, 2, 1}, {},
                                                   Fill::poison());
    for (long i = -1; i <= 8; ++i)
      for (long j = -1; j <= 8; ++j)
        for (long k = 0; k < 5; ++k)
          poisoned.set(2 + i, 2 + j, 1 + k, 0.5 * i - j + k);
    InvocationArgs p;
    p.fields = {{"inp", &poisoned}, {"out", &out}};
    ResolvedCall rp = resolve_domain_origin(s, p);
    CHECK(rp.domain == Index3{8, 8, 5});
    invoke(s, p);
    for (long i = 0; i < 8; ++i)
      for (long j = 0; j < 8; ++j)
        for (long k = 0; k < 5; ++k)
          CHECK(out.get(i, j, k) == 0.0); // Laplacian of a linear function
  }
}

TEST_CASE("resolve_domain_origin: copy uses the whole field") {
  CompiledStencil s = copy();
  for (long n : {1L, 3L, 6L}) {
    FieldStorage a = FieldStorage::allocate(DType::f64, {n, n, n}, {0, 0, 0});
    FieldStorage b = FieldStorage::allocate(DType::f64, {n, n, n}, {0, 0, 0});
    InvocationArgs args;
    args.fields = {{"a", &a}, {"b", &b}};
    CHECK(resolve_domain_origin(s, args).domain == Index3{n, n, n});
  }
}

TEST_CASE("resolve_domain_origin: explicit overrides") {
  CompiledStencil s = laplacian();
  FieldStorage inp = FieldStorage::allocate(DType::f64, {8, 8, 5}, {1, 1, 0});
  FieldStorage out = FieldStorage::allocate(DType::f64, {8, 8, 5}, {0, 0, 0});
  InvocationArgs args;
  args.fields = {{"inp", &inp}, {"out", &out}};
  args.domain = Index3{4, 5, 2};
  args.origin = Index3{2, 1, 1};
  args.field_origins = {{"out", Index3{0, 0, 0}}};
  ResolvedCall r = resolve_domain_origin(s, args);
  CHECK(r.domain == Index3{4, 5, 2});
  CHECK(r.origins.at("inp") == Index3{2, 1, 1});
  CHECK(r.origins.at("out") == Index3{0, 0, 0});
}

TEST_CASE("resolve_domain_origin: errors") {
  CompiledStencil s = laplacian();
  FieldStorage inp = FieldStorage::allocate(DType::f64, {8, 8, 5}, {1, 1, 0});
  FieldStorage out = FieldStorage::allocate(DType::f64, {8, 8, 5}, {0, 0, 0});
  InvocationArgs args;
  args.fields = {{"inp", &inp}, {"out", &out}};

  SUBCASE("zero-sized domain") {
    args.domain = Index3{0, 4, 4};
    CHECK(error_code([&] { resolve_domain_origin(s, args); }) == ErrorCode::DomainTooSmall);
  }
  SUBCASE("no room left by a field names that field") {
    FieldStorage narrow = FieldStorage::allocate(DType::f64, {8, 8, 5}, {1, 0, 0});
    args.fields["inp"] = &narrow; // origin j = 0 with extent lo j = -1 leaves nothing
    args.origin = Index3{1, 7, 0};
    args.field_origins = {{"out", Index3{0, 0, 0}}};
    std::string message;
    CHECK(error_code([&] { resolve_domain_origin(s, args); }, &message) ==
          ErrorCode::DomainTooSmall);
    CHECK(message.find("'inp'") != std::string::npos);
  }
  SUBCASE("domain beyond the storage") {
    args.domain = Index3{9, 8, 5};
    std::string message;
    CHECK(error_code([&] { resolve_domain_origin(s, args); }, &message) == ErrorCode::OutOfBounds);
    CHECK(message.find("'inp'") != std::string::npos);
  }
  SUBCASE("origin too close to the edge for the extent") {
    args.origin = Index3{0, 1, 0};
    CHECK(error_code([&] { resolve_domain_origin(s, args); }) == ErrorCode::OutOfBounds);
  }
  SUBCASE("missing field") {
    args.fields.erase("out");
    CHECK(error_code([&] { resolve_domain_origin(s, args); }) == ErrorCode::MissingArgument);
  }
}

TEST_CASE("k_min is enforced at invocation") {
  const std::string text = "stencil two(a: Field[f64], b: Field[f64]):\n"
                           "    with computation(FORWARD):\n"
                           "        with interval(0, 1):\n"
                           "            b = a\n"
                           "        with interval(1, -1):\n"
                           "            b = b[0,0,-1] + a\n"
                           "        with interval(-1, None):\n"
                           "            b = 2.0 * a\n";
  CompiledStencil s = compile_stencil(source(text), "two", BackendId::debug);
  CHECK(s.k_min() == 2);
  FieldStorage a = FieldStorage::allocate(DType::f64, {3, 3, 4}, {0, 0, 0});
  FieldStorage b = FieldStorage::allocate(DType::f64, {3, 3, 4}, {0, 0, 0});
  InvocationArgs args;
  args.fields = {{"a", &a}, {"b", &b}};
  args.domain = Index3{3, 3, 1};
  CHECK(error_code([&] { invoke(s, args); }) == ErrorCode::KBelowMinimum);
  args.domain = Index3{3, 3, 0};
  CHECK(error_code([&] { invoke(s, args); }) == ErrorCode::DomainTooSmall);
  args.domain = Index3{3, 3, 2};
  CHECK_NOTHROW(invoke(s, args));
}

TEST_CASE("invoke: argument validation") {
  CompiledStencil gen = copy(BackendId::gen);
  const LayoutSpec gen_layout = default_layout(BackendId::gen);
  FieldStorage a = FieldStorage::allocate(DType::f64, {4, 4, 4}, {0, 0, 0}, gen_layout);
  FieldStorage b = FieldStorage::allocate(DType::f64, {4, 4, 4}, {0, 0, 0}, gen_layout);
  InvocationArgs args;
  args.fields = {{"a", &a}, {"b", &b}};
  CHECK_NOTHROW(invoke(gen, args));

  SUBCASE("wrong layout for gen") {
    FieldStorage k_inner = FieldStorage::allocate(DType::f64, {4, 4, 4}, {0, 0, 0});
    args.fields["b"] = &k_inner;
    CHECK(error_code([&] { invoke(gen, args); }) == ErrorCode::LayoutMismatch);
  }
  SUBCASE("f32 storage for an f64 parameter") {
    FieldStorage single = FieldStorage::allocate(DType::f32, {4, 4, 4}, {0, 0, 0}, gen_layout);
    args.fields["a"] = &single;
    CHECK(error_code([&] { invoke(gen, args); }) == ErrorCode::DTypeMismatch);
  }
  SUBCASE("the same storage as input and output") {
    args.fields["b"] = &a;
    CHECK(error_code([&] { invoke(gen, args); }) == ErrorCode::AliasedFields);
  }
  SUBCASE("unknown field name") {
    args.fields["c"] = &b;
    CHECK(error_code([&] { invoke(gen, args); }) == ErrorCode::UnexpectedArgument);
  }
  SUBCASE("missing scalar") {
    CompiledStencil h = hdiff(BackendId::debug);
    StencilInputs in = make_kernel_inputs("hdiff", h, {4, 4, 2}, 1);
    InvocationArgs hargs = in.arguments();
    hargs.scalars.clear();
    CHECK(error_code([&] { invoke(h, hargs); }) == ErrorCode::MissingArgument);
  }
  SUBCASE("unknown backend name") {
    std::string message;
    CHECK(error_code([&] { parse_backend("gtcuda"); }, &message) == ErrorCode::UnknownBackend);
    CHECK(message.find("debug, vec, gen") != std::string::npos);
  }
}

TEST_CASE("invoke: full and skip validation give identical outputs") {
  for (BackendId backend : kBackends) {
    CAPTURE(to_string(backend));
    CompiledStencil full = hdiff(backend);
    CompiledStencil skip = full.with_validation(ValidationPolicy::skip);
    StencilInputs a = make_kernel_inputs("hdiff", full, {12, 10, 6}, 7);
    StencilInputs b = make_kernel_inputs("hdiff", skip, {12, 10, 6}, 7);
    ExecutionReport rf = invoke(full, a.arguments());
    ExecutionReport rs = invoke(skip, b.arguments());
    CHECK(bitwise_equal(a.fields.at("out"), b.fields.at("out")));
    CHECK(rf.validation_ns > 0);
    CHECK(rs.validation_ns == 0);
    CHECK(rf.kernel_ns <= rf.total_ns);
    CHECK(rs.kernel_ns <= rs.total_ns);
  }
}

TEST_CASE("invoke: input-only fields are unchanged") {
  for (BackendId backend : kBackends) {
    CAPTURE(to_string(backend));
    for (const char *kernel : {"hdiff", "vadv"}) {
      CAPTURE(kernel);
      CompiledStencil s =
          compile_stencil(SourceProgram::from_file(kernel_path(std::string(kernel) + ".gts")),
                          kernel, backend, {{"LIM", 0.0}});
      StencilInputs in = make_kernel_inputs(kernel, s, {9, 7, 5}, 3);
      const auto before = in.fields;
      invoke(s, in.arguments());
      const auto written = s.implementation().written_fields();
      for (const auto &[name, field] : in.fields)
        if (std::find(written.begin(), written.end(), name) == written.end()) {
          CAPTURE(name);
          CHECK(bitwise_equal(before.at(name), field));
        }
    }
  }
}

TEST_CASE("invoke: explicit defaults match implicit resolution (property)") {
  std::mt19937_64 rng(41);
  for (int n = 0; n < 12; ++n) {
    testing::RandomStencil program = testing::random_stencil(rng, n);
    CAPTURE(program.source);
    const BackendId backend = kBackends[n % 3];
    CompiledStencil s = compile_stencil(source(program.source), program.name, backend);
    const Index3 domain = testing::random_domain(rng, program.k_min, 10);
    StencilInputs implicit = make_random_inputs(s, domain, 500 + n);
    StencilInputs explicit_args = make_random_inputs(s, domain, 500 + n);

    InvocationArgs a = implicit.arguments();
    a.domain.reset();
    ResolvedCall r = resolve_domain_origin(s, a);
    invoke(s, a);

    InvocationArgs b = explicit_args.arguments();
    b.domain = r.domain;
    b.field_origins = r.origins;
    invoke(s, b);
    for (const auto &[name, field] : implicit.fields) {
      CAPTURE(name);
      CHECK(bitwise_equal(field, explicit_args.fields.at(name)));
    }
  }
}

TEST_CASE("invoke: thread count does not change gen results") {
  CompiledStencil s = hdiff(BackendId::gen);
  StencilInputs one = make_kernel_inputs("hdiff", s, {20, 17, 6}, 9);
  StencilInputs many = make_kernel_inputs("hdiff", s, {20, 17, 6}, 9);
  InvocationArgs a = one.arguments(), b = many.arguments();
  a.num_threads = 1;
  b.num_threads = 4;
  invoke(s, a);
  invoke(s, b);
  CHECK(bitwise_equal(one.fields.at("out"), many.fields.at("out")));
}
