#include "gts/frontend.hpp"
#include "gts/serialize.hpp"
#include "test_paths.hpp"

#include <doctest.h>

#include <random>
#include <set>

using namespace gts;
using gts::testing::data_path;
using gts::testing::kernel_path;
using gts::testing::read_text;
using gts::testing::source;

namespace {

ErrorCode error_code(const std::function<void()> &fn) {
  try {
    fn();
  } catch (const Error &e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::SyntaxError;
}

/// Every read of `field` in the stencil, as offsets.
std::set<Offset3> read_offsets(const StencilDefinition &def, const std::string &field) {
  std::set<Offset3> out;
  for (const auto &comp : def.computations)
    for (const auto &block : comp.blocks)
      for (const auto &stmt : block.body)
        visit_exprs(stmt, [&](const Expr &e) {
          if (e.kind == Expr::Kind::field_access && e.name == field)
            out.insert(e.offset);
        });
  return out;
}

const char *kLapFunction =
    "function lap(f):\n"
    "    return -4.0*f[0,0,0]+f[1,0,0]+f[-1,0,0]+f[0,1,0]+f[0,-1,0]\n\n";

StencilDefinition load(const std::string &text, const std::string &name,
                       const ExternalsBinding &externals = {}) {
  return load_stencil(source(text), name, externals);
}

} // namespace

TEST_CASE("parse_program: minimal copy stencil") {
  ParsedProgram p = parse_program(source(
      "stencil copy(a: Field[f64], b: Field[f64]): with computation(PARALLEL): "
      "with interval(0, None): b = a[0,0,0]\n"));
  REQUIRE(p.stencils.size() == 1);
  const StencilDefinition &s = p.stencils[0];
  CHECK(s.name == "copy");
  REQUIRE(s.api_fields.size() == 2);
  CHECK(s.api_fields[0].name == "a");
  CHECK(s.api_fields[1].dtype == DType::f64);
  REQUIRE(s.computations.size() == 1);
  CHECK(s.computations[0].order == IterationOrder::parallel);
  REQUIRE(s.computations[0].blocks.size() == 1);
  const IntervalBlock &block = s.computations[0].blocks[0];
  REQUIRE(block.interval.has_value());
  CHECK(*block.interval == Interval{{LevelMarker::start, 0}, {LevelMarker::end, 0}});
  REQUIRE(block.body.size() == 1);
  const Stmt &assign = block.body[0];
  CHECK(assign.kind == Stmt::Kind::assign);
  CHECK(assign.target.name == "b");
  CHECK(assign.target.offset == Offset3{0, 0, 0});
  CHECK(assign.value.kind == Expr::Kind::field_access);
  CHECK(assign.value.name == "a");
}

TEST_CASE("parse_program: FORWARD and BACKWARD computations keep program order") {
  ParsedProgram p = parse_program(SourceProgram::from_file(kernel_path("vadv.gts")));
  REQUIRE(p.stencils.size() == 1);
  const auto &comps = p.stencils[0].computations;
  REQUIRE(comps.size() == 2);
  CHECK(comps[0].order == IterationOrder::forward);
  CHECK(comps[1].order == IterationOrder::backward);
  REQUIRE(comps[0].blocks.size() == 2);
  CHECK(*comps[0].blocks[0].interval == Interval{{LevelMarker::start, 0}, {LevelMarker::start, 1}});
  CHECK(*comps[0].blocks[1].interval == Interval{{LevelMarker::start, 1}, {LevelMarker::end, 0}});
  REQUIRE(comps[1].blocks.size() == 2);
  CHECK(*comps[1].blocks[0].interval == Interval{{LevelMarker::end, -1}, {LevelMarker::end, 0}});
  CHECK(*comps[1].blocks[1].interval == Interval{{LevelMarker::start, 0}, {LevelMarker::end, -1}});
}

TEST_CASE("parse_program: bare field name is a zero-offset read") {
  ParsedProgram sugar = parse_program(SourceProgram::from_file(data_path("copy_sugar.gts")));
  ParsedProgram explicit_offsets = parse_program(SourceProgram::from_file(data_path("copy.gts")));
  CHECK(dump_ir(sugar.stencils[0]) == dump_ir(explicit_offsets.stencils[0]));
  CHECK(sugar.stencils[0].computations[0].blocks[0].body[0].value.offset == Offset3{0, 0, 0});
}

TEST_CASE("parse_program: lexical and syntax errors") {
  SUBCASE("tab in indentation") {
    CHECK(error_code([] {
            parse_program(source("stencil s(a: Field[f64]):\n\twith computation(PARALLEL):\n"
                                  "\t\ta = 1.0\n"));
          }) == ErrorCode::IndentationError);
  }
  SUBCASE("inconsistent dedent") {
    CHECK(error_code([] {
            parse_program(source("stencil s(a: Field[f64], b: Field[f64]):\n"
                                  "    with computation(PARALLEL):\n"
                                  "        b = a\n"
                                  "      b = a\n"));
          }) == ErrorCode::IndentationError);
  }
  SUBCASE("unknown iteration order") {
    CHECK(error_code([] {
            parse_program(source("stencil s(a: Field[f64], b: Field[f64]):\n"
                                  "    with computation(SIDEWAYS):\n"
                                  "        b = a\n"));
          }) == ErrorCode::UnknownKeyword);
  }
  SUBCASE("unsupported statement keyword") {
    CHECK(error_code([] {
            parse_program(source("stencil s(a: Field[f64], b: Field[f64]):\n"
                                  "    with computation(PARALLEL):\n"
                                  "        while a:\n"
                                  "            b = a\n"));
          }) == ErrorCode::UnknownKeyword);
  }
  SUBCASE("missing bracket reports a position") {
    try {
      parse_program(source("stencil s(a: Field[f64], b: Field[f64]):\n"
                           "    with computation(PARALLEL):\n"
                           "        b = a[0,0,0\n"));
      FAIL("expected a syntax error");
    } catch (const CompileError &e) {
      CHECK(e.code() == ErrorCode::SyntaxError);
      CHECK(e.diagnostics()[0].span.line >= 3);
      CHECK(e.rendered().find("test.gts:") == 0);
    }
  }
}

TEST_CASE("parse_program: reformatting does not change the dump") {
  const std::string plain = read_text(kernel_path("hdiff.gts"));
  std::string restyled = "# leading comment\n\n";
  std::size_t start = 0;
  while (start < plain.size()) {
    std::size_t end = plain.find('\n', start);
    std::string line = plain.substr(start, end - start);
    restyled += line + "   \n";
    if (line.find("with interval") != std::string::npos)
      restyled += "\n# interior comment\n";
    start = end == std::string::npos ? plain.size() : end + 1;
  }
  ParsedProgram a = parse_program(source(plain));
  ParsedProgram b = parse_program(source(restyled));
  CHECK(dump_ir(a.stencils[0]) == dump_ir(b.stencils[0]));
}

TEST_CASE("inline_functions: lap(u) expands to the five-point offsets") {
  StencilDefinition def = load_stencil(SourceProgram::from_file(data_path("laplacian.gts")),
                                       "laplacian", {});
  CHECK(read_offsets(def, "inp") ==
        std::set<Offset3>{{0, 0, 0}, {1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}});
}

TEST_CASE("inline_functions: argument offsets compose with body offsets") {
  StencilDefinition def =
      load(std::string(kLapFunction) + "stencil s(u: Field[f64], out: Field[f64]):\n"
                                        "    with computation(PARALLEL):\n"
                                        "        out = lap(u[1,0,0])\n",
           "s");
  CHECK(read_offsets(def, "u") ==
        std::set<Offset3>{{2, 0, 0}, {0, 0, 0}, {1, 1, 0}, {1, -1, 0}, {1, 0, 0}});
}

TEST_CASE("inline_functions: nested offset composition (property)") {
  std::mt19937 rng(7);
  std::uniform_int_distribution<int> off(-3, 3);
  auto triple = [&] { return Offset3{off(rng), off(rng), off(rng)}; };
  auto text = [](const Offset3 &o) {
    return "[" + std::to_string(o[0]) + "," + std::to_string(o[1]) + "," + std::to_string(o[2]) +
           "]";
  };
  for (int trial = 0; trial < 50; ++trial) {
    const Offset3 a = triple(), b = triple(), c = triple();
    const std::string program = "function inner(f):\n    return f" + text(a) +
                                "\n\nfunction outer(g):\n    return inner(g" + text(b) +
                                ")\n\nstencil s(u: Field[f64], out: Field[f64]):\n"
                                "    with computation(FORWARD):\n"
                                "        out = outer(u" +
                                text(c) + ")\n";
    StencilDefinition def = load(program, "s");
    const Offset3 expected{a[0] + b[0] + c[0], a[1] + b[1] + c[1], a[2] + b[2] + c[2]};
    CHECK(read_offsets(def, "u") == std::set<Offset3>{expected});
  }
}

TEST_CASE("inline_functions: locals become fresh temporaries") {
  StencilDefinition def = load("function twice(f):\n"
                               "    t = f[1,0,0] * 2.0\n"
                               "    return t\n\n"
                               "stencil s(u: Field[f64], out: Field[f64]):\n"
                               "    with computation(PARALLEL):\n"
                               "        out = twice(u) + twice(u[0,1,0])\n",
                               "s");
  const auto &body = def.computations[0].blocks[0].body;
  REQUIRE(body.size() == 3);
  CHECK(body[0].target.name.rfind("twice__t__", 0) == 0);
  CHECK(body[1].target.name.rfind("twice__t__", 0) == 0);
  CHECK(body[0].target.name != body[1].target.name);
  CHECK(body[2].target.name == "out");
}

TEST_CASE("inline_functions: errors") {
  SUBCASE("direct recursion") {
    CHECK(error_code([] {
            load("function f(x):\n    return f(x)\n\n"
                 "stencil s(a: Field[f64], b: Field[f64]):\n"
                 "    with computation(PARALLEL):\n"
                 "        b = f(a)\n",
                 "s");
          }) == ErrorCode::RecursionError);
  }
  SUBCASE("mutual recursion") {
    CHECK(error_code([] {
            load("function f(x):\n    return g(x)\n\nfunction g(x):\n    return f(x)\n\n"
                 "stencil s(a: Field[f64], b: Field[f64]):\n"
                 "    with computation(PARALLEL):\n"
                 "        b = f(a)\n",
                 "s");
          }) == ErrorCode::RecursionError);
  }
  SUBCASE("arity") {
    CHECK(error_code([] {
            load(std::string(kLapFunction) + "stencil s(a: Field[f64], b: Field[f64]):\n"
                                             "    with computation(PARALLEL):\n"
                                             "        b = lap(a, a)\n",
                 "s");
          }) == ErrorCode::ArityError);
  }
  SUBCASE("unknown function") {
    CHECK(error_code([] {
            load("stencil s(a: Field[f64], b: Field[f64]):\n"
                 "    with computation(PARALLEL):\n"
                 "        b = sin(a)\n",
                 "s");
          }) == ErrorCode::UnknownFunction);
  }
}

TEST_CASE("inline_functions: expressions keep source positions") {
  StencilDefinition def = load_stencil(SourceProgram::from_file(data_path("laplacian.gts")),
                                       "bilaplacian", {});
  int nodes = 0;
  for (const auto &stmt : def.computations[0].blocks[0].body)
    visit_exprs(stmt, [&](const Expr &e) {
      ++nodes;
      CHECK(e.span.line > 0);
    });
  CHECK(nodes > 10);
}

TEST_CASE("bind_externals") {
  const std::string program = "stencil s(a: Field[f64], b: Field[f64]):\n"
                              "    with computation(PARALLEL):\n"
                              "        if a > LIM:\n"
                              "            b = a * LIM\n"
                              "        else:\n"
                              "            b = LIM\n";
  SUBCASE("every occurrence becomes the literal") {
    StencilDefinition def = load(program, "s", {{"LIM", 1e-3}});
    int literals = 0;
    for (const auto &stmt : def.computations[0].blocks[0].body)
      visit_exprs(stmt, [&](const Expr &e) {
        CHECK(e.kind != Expr::Kind::name);
        if (e.kind == Expr::Kind::literal && e.value == 1e-3)
          ++literals;
      });
    CHECK(literals == 3);
    REQUIRE(def.externals.count("LIM") == 1);
    CHECK(to_double(def.externals.at("LIM")) == 1e-3);
  }
  SUBCASE("no free names: identity") {
    ParsedProgram p = parse_program(SourceProgram::from_file(data_path("copy.gts")));
    StencilDefinition bound = bind_externals(p.stencils[0], {});
    CHECK(dump_ir(bound) == dump_ir(p.stencils[0]));
    CHECK(canonical_serialize(bound) == canonical_serialize(p.stencils[0]));
  }
  SUBCASE("missing binding names the identifier") {
    const std::string uses_k0 = "stencil s(a: Field[f64], b: Field[f64]):\n"
                                "    with computation(PARALLEL):\n"
                                "        b = a * K0\n";
    try {
      load(uses_k0, "s", {{"LIM", 1.0}});
      FAIL("expected UnboundExternal");
    } catch (const CompileError &e) {
      CHECK(e.code() == ErrorCode::UnboundExternal);
      CHECK(e.rendered().find("K0") != std::string::npos);
    }
  }
  SUBCASE("non-numeric binding text") {
    ExternalsBinding binding;
    CHECK(error_code([&] { parse_external_assignment("LIM=abc", binding); }) ==
          ErrorCode::TypeError);
    parse_external_assignment("LIM=0.5", binding);
    parse_external_assignment("N=3", binding);
    CHECK(std::get<double>(binding.at("LIM")) == 0.5);
    CHECK(std::get<std::int64_t>(binding.at("N")) == 3);
  }
}

TEST_CASE("load_stencil: unknown stencil lists the available ones") {
  try {
    load_stencil(SourceProgram::from_file(data_path("laplacian.gts")), "nope", {});
    FAIL("expected UnknownStencil");
  } catch (const CompileError &e) {
    CHECK(e.code() == ErrorCode::UnknownStencil);
    CHECK(e.rendered().find("laplacian, bilaplacian") != std::string::npos);
  }
}
