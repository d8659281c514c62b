#include "gts/serialize.hpp"

#include <openssl/evp.h>

#include <charconv>
#include <cmath>
#include <cstring>
#include <sstream>

namespace gts {

namespace {

class ByteWriter {
public:
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int b = 0; b < 4; ++b)
      bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
  }
  void u64(std::uint64_t v) {
    for (int b = 0; b < 8; ++b)
      bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
  }
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
  void f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    u64(bits);
  }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes_.insert(bytes_.end(), s.begin(), s.end());
  }

  std::vector<std::uint8_t> take() { return std::move(bytes_); }

private:
  std::vector<std::uint8_t> bytes_;
};

void write_expr(ByteWriter &w, const Expr &e) {
  w.u8(static_cast<std::uint8_t>(e.kind));
  switch (e.kind) {
  case Expr::Kind::field_access:
    w.str(e.name);
    for (int d = 0; d < 3; ++d)
      w.i64(e.offset[d]);
    break;
  case Expr::Kind::scalar_ref:
  case Expr::Kind::name:
  case Expr::Kind::call:
    w.str(e.name);
    break;
  case Expr::Kind::literal:
    w.f64(e.value);
    break;
  case Expr::Kind::unary:
    w.u8(static_cast<std::uint8_t>(e.unary_op));
    break;
  case Expr::Kind::binary:
    w.u8(static_cast<std::uint8_t>(e.binary_op));
    break;
  case Expr::Kind::builtin_call:
    w.u8(static_cast<std::uint8_t>(e.builtin));
    break;
  }
  w.u32(static_cast<std::uint32_t>(e.args.size()));
  for (const auto &arg : e.args)
    write_expr(w, arg);
}

void write_stmts(ByteWriter &w, const std::vector<Stmt> &stmts);

void write_stmt(ByteWriter &w, const Stmt &s) {
  w.u8(static_cast<std::uint8_t>(s.kind));
  if (s.kind == Stmt::Kind::assign) {
    write_expr(w, s.target);
    write_expr(w, s.value);
    return;
  }
  write_expr(w, s.value);
  write_stmts(w, s.then_body);
  write_stmts(w, s.else_body);
}

void write_stmts(ByteWriter &w, const std::vector<Stmt> &stmts) {
  w.u32(static_cast<std::uint32_t>(stmts.size()));
  for (const auto &s : stmts)
    write_stmt(w, s);
}

void write_interval(ByteWriter &w, const Interval &iv) {
  for (const AxisBound *b : {&iv.start, &iv.end}) {
    w.u8(static_cast<std::uint8_t>(b->level));
    w.i64(b->offset);
  }
}

void write_extent(ByteWriter &w, const Extent &e) {
  for (int d = 0; d < 3; ++d) {
    w.i64(e.lo[d]);
    w.i64(e.hi[d]);
  }
}

void write_externals(ByteWriter &w, const ExternalsBinding &ext) {
  w.u32(static_cast<std::uint32_t>(ext.size()));
  for (const auto &[name, value] : ext) {
    w.str(name);
    if (const auto *i = std::get_if<std::int64_t>(&value)) {
      w.u8(0);
      w.i64(*i);
    } else {
      w.u8(1);
      w.f64(std::get<double>(value));
    }
  }
}

template <typename Decl> void write_decls(ByteWriter &w, const std::vector<Decl> &decls) {
  w.u32(static_cast<std::uint32_t>(decls.size()));
  for (const auto &d : decls) {
    w.str(d.name);
    w.u8(static_cast<std::uint8_t>(d.dtype));
  }
}

} // namespace

std::vector<std::uint8_t> canonical_serialize(const StencilDefinition &def) {
  ByteWriter w;
  w.str(kCanonicalSchema);
  w.str("definition");
  w.str(def.name);
  write_decls(w, def.api_fields);
  write_decls(w, def.api_scalars);
  write_externals(w, def.externals);
  w.u32(static_cast<std::uint32_t>(def.computations.size()));
  for (const auto &comp : def.computations) {
    w.u8(static_cast<std::uint8_t>(comp.order));
    w.u32(static_cast<std::uint32_t>(comp.blocks.size()));
    for (const auto &block : comp.blocks) {
      w.u8(block.interval ? 1 : 0);
      if (block.interval)
        write_interval(w, *block.interval);
      write_stmts(w, block.body);
    }
  }
  return w.take();
}

std::vector<std::uint8_t> canonical_serialize(const StencilImplementation &impl) {
  ByteWriter w;
  w.str(kCanonicalSchema);
  w.str("implementation");
  w.str(impl.name);
  write_decls(w, impl.api_fields);
  write_decls(w, impl.api_scalars);
  write_externals(w, impl.externals);
  w.i64(impl.k_min);
  w.u32(static_cast<std::uint32_t>(impl.field_extents.size()));
  for (const auto &[name, extent] : impl.field_extents) {
    w.str(name);
    write_extent(w, extent);
  }
  w.u32(static_cast<std::uint32_t>(impl.temporaries.size()));
  for (const auto &t : impl.temporaries) {
    w.str(t.name);
    w.u8(static_cast<std::uint8_t>(t.dtype));
    write_extent(w, t.extent);
  }
  w.u32(static_cast<std::uint32_t>(impl.multistages.size()));
  for (const auto &ms : impl.multistages) {
    w.u8(static_cast<std::uint8_t>(ms.order));
    w.u32(static_cast<std::uint32_t>(ms.stages.size()));
    for (const auto &stage : ms.stages) {
      write_interval(w, stage.interval);
      w.u64(stage.block);
      write_extent(w, stage.compute_extent);
      write_stmt(w, stage.body);
    }
  }
  return w.take();
}

// ---------------------------------------------------------------------------
// Text dumps
// ---------------------------------------------------------------------------

std::string format_number(double value) {
  if (std::isnan(value))
    return "nan";
  if (std::isinf(value))
    return value > 0 ? "inf" : "-inf";
  char buffer[64];
  auto [end, ec] = std::to_chars(buffer, buffer + sizeof buffer, value);
  (void)ec;
  std::string out(buffer, end);
  if (out.find_first_of(".eE") == std::string::npos)
    out += ".0";
  return out;
}

std::string format_expr(const Expr &e) {
  switch (e.kind) {
  case Expr::Kind::field_access:
    return e.name + "[" + std::to_string(e.offset[0]) + "," + std::to_string(e.offset[1]) +
           "," + std::to_string(e.offset[2]) + "]";
  case Expr::Kind::scalar_ref:
    return e.name;
  case Expr::Kind::literal:
    return format_number(e.value);
  case Expr::Kind::name:
    return e.name + "?";
  case Expr::Kind::unary:
    return "(" + std::string(to_string(e.unary_op)) +
           (e.unary_op == UnaryOp::logical_not ? " " : "") + format_expr(e.args[0]) + ")";
  case Expr::Kind::binary:
    return "(" + format_expr(e.args[0]) + " " + std::string(to_string(e.binary_op)) + " " +
           format_expr(e.args[1]) + ")";
  case Expr::Kind::builtin_call:
  case Expr::Kind::call: {
    std::string out =
        e.kind == Expr::Kind::call ? e.name : std::string(to_string(e.builtin));
    out += "(";
    for (std::size_t i = 0; i < e.args.size(); ++i)
      out += (i ? ", " : "") + format_expr(e.args[i]);
    return out + ")";
  }
  }
  return "?";
}

namespace {

void dump_stmt(std::ostringstream &os, const Stmt &s, int indent) {
  std::string pad(static_cast<std::size_t>(indent), ' ');
  if (s.kind == Stmt::Kind::assign) {
    os << pad << format_expr(s.target) << " = " << format_expr(s.value) << "\n";
    return;
  }
  os << pad << "if " << format_expr(s.value) << ":\n";
  for (const auto &t : s.then_body)
    dump_stmt(os, t, indent + 2);
  if (!s.else_body.empty()) {
    os << pad << "else:\n";
    for (const auto &t : s.else_body)
      dump_stmt(os, t, indent + 2);
  }
}

void dump_header(std::ostringstream &os, std::string_view stage, const std::string &name) {
  os << "# gts-ir v1 " << stage << "\n";
  os << "stencil " << name << "\n";
}

} // namespace

std::string dump_ir(const StencilDefinition &def) {
  std::ostringstream os;
  dump_header(os, "definition", def.name);
  for (const auto &f : def.api_fields)
    os << "  field " << f.name << ": " << to_string(f.dtype) << "\n";
  for (const auto &s : def.api_scalars)
    os << "  scalar " << s.name << ": " << to_string(s.dtype) << "\n";
  for (const auto &[name, value] : def.externals)
    os << "  external " << name << " = " << to_string(value) << "\n";
  for (const auto &comp : def.computations) {
    os << "  computation " << to_string(comp.order) << "\n";
    for (const auto &block : comp.blocks) {
      os << "    interval " << (block.interval ? to_string(*block.interval) : "<implicit>")
         << "\n";
      for (const auto &s : block.body)
        dump_stmt(os, s, 6);
    }
  }
  return os.str();
}

std::string dump_ir(const StencilImplementation &impl) {
  std::ostringstream os;
  dump_header(os, "implementation", impl.name);
  os << "  k_min " << impl.k_min << "\n";
  for (const auto &f : impl.api_fields) {
    os << "  field " << f.name << ": " << to_string(f.dtype);
    auto it = impl.field_extents.find(f.name);
    os << " extent " << to_string(it != impl.field_extents.end() ? it->second : Extent{})
       << "\n";
  }
  for (const auto &s : impl.api_scalars)
    os << "  scalar " << s.name << ": " << to_string(s.dtype) << "\n";
  for (const auto &[name, value] : impl.externals)
    os << "  external " << name << " = " << to_string(value) << "\n";
  for (const auto &t : impl.temporaries)
    os << "  temporary " << t.name << ": " << to_string(t.dtype) << " extent "
       << to_string(t.extent) << "\n";
  for (const auto &ms : impl.multistages) {
    os << "  multistage " << to_string(ms.order) << "\n";
    for (std::size_t i = 0; i < ms.stages.size(); ++i) {
      const Stage &stage = ms.stages[i];
      os << "    stage " << i << " block " << stage.block << " interval "
         << to_string(stage.interval) << " extent " << to_string(stage.compute_extent)
         << "\n";
      dump_stmt(os, stage.body, 6);
    }
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Fingerprints
// ---------------------------------------------------------------------------

std::string Fingerprint::hex() const {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out;
  out.reserve(64);
  for (auto b : digest) {
    out += digits[b >> 4];
    out += digits[b & 0xf];
  }
  return out;
}

std::string Fingerprint::short_hex() const { return hex().substr(0, 8); }

Fingerprint sha256(std::string_view data) {
  Fingerprint fp;
  unsigned int length = 0;
  if (EVP_Digest(data.data(), data.size(), fp.digest.data(), &length, EVP_sha256(), nullptr) !=
          1 ||
      length != fp.digest.size())
    throw Error(ErrorCode::IoError, "SHA-256 computation failed");
  return fp;
}

Fingerprint fingerprint(const StencilDefinition &def, std::string_view backend_id,
                        const ExternalsBinding &externals, std::string_view toolchain,
                        std::string_view config) {
  ByteWriter w;
  w.str("gts-fp-v1");
  auto ir = canonical_serialize(def);
  w.str(std::string_view(reinterpret_cast<const char *>(ir.data()), ir.size()));
  w.str(backend_id);
  write_externals(w, externals);
  w.str(config);
  w.str(toolchain);
  auto bytes = w.take();
  return sha256(std::string_view(reinterpret_cast<const char *>(bytes.data()), bytes.size()));
}

} // namespace gts
