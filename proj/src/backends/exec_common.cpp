#include "exec_common.hpp"

#include <algorithm>
#include <cstring>

#include <map>

namespace gts {

std::string_view to_string(BackendId id) {
  switch (id) {
  case BackendId::debug: return "debug";
  case BackendId::vec: return "vec";
  case BackendId::gen: return "gen";
  }
  return "?";
}

std::string supported_backends() { return "debug, vec, gen"; }

BackendId parse_backend(std::string_view name) {
  for (BackendId id : {BackendId::debug, BackendId::vec, BackendId::gen})
    if (name == to_string(id))
      return id;
  throw Error(ErrorCode::UnknownBackend, "unknown backend '" + std::string(name) +
                                             "' (supported: " + supported_backends() + ")");
}

LayoutSpec default_layout(BackendId id) {
  LayoutSpec layout;
  if (id == BackendId::gen)
    layout.permutation = {2, 1, 0};
  return layout;
}

namespace detail {

namespace {

struct Resolver {
  std::map<std::string, int> field_slots;
  std::map<std::string, int> scalar_slots;
  std::size_t api_count = 0;

  Node node(const Expr &e) const {
    Node n;
    n.kind = e.kind;
    n.offset = e.offset;
    n.value = e.value;
    n.unary_op = e.unary_op;
    n.binary_op = e.binary_op;
    n.builtin = e.builtin;
    if (e.kind == Expr::Kind::field_access)
      n.slot = field_slots.at(e.name);
    else if (e.kind == Expr::Kind::scalar_ref)
      n.slot = scalar_slots.at(e.name);
    else if (e.kind == Expr::Kind::name || e.kind == Expr::Kind::call)
      throw Error(ErrorCode::UnboundExternal,
                  "unresolved name '" + e.name + "' reached the executor");
    for (const auto &arg : e.args)
      n.args.push_back(node(arg));
    return n;
  }

  Statement statement(const Stmt &s) const {
    Statement out;
    out.value = node(s.value);
    if (s.kind == Stmt::Kind::assign) {
      out.target = field_slots.at(s.target.name);
      out.target_is_api = static_cast<std::size_t>(out.target) < api_count;
      return out;
    }
    out.is_if = true;
    for (const auto &t : s.then_body)
      out.then_body.push_back(statement(t));
    for (const auto &t : s.else_body)
      out.else_body.push_back(statement(t));
    return out;
  }
};

} // namespace

namespace {

/// Buffers released by finished invocations on this thread.
thread_local std::vector<TempBuffer> temp_pool;
constexpr std::size_t kTempPoolLimit = 16;

} // namespace

TempBuffer acquire_zeroed(std::size_t bytes) {
  auto best = temp_pool.end();
  for (auto it = temp_pool.begin(); it != temp_pool.end(); ++it)
    if (it->bytes >= bytes && (best == temp_pool.end() || it->bytes < best->bytes))
      best = it;
  TempBuffer buffer;
  if (best != temp_pool.end()) {
    buffer = std::move(*best);
    temp_pool.erase(best);
  } else {
    buffer.data = std::make_unique<std::byte[]>(bytes);
    buffer.bytes = bytes;
  }
  std::memset(buffer.data.get(), 0, bytes);
  return buffer;
}

ExecutionContext::~ExecutionContext() {
  for (auto &b : temp_buffers_) {
    if (temp_pool.size() >= kTempPoolLimit)
      temp_pool.erase(temp_pool.begin());
    temp_pool.push_back(std::move(b));
  }
}

ExecutionContext::ExecutionContext(const StencilImplementation &impl, const CallArguments &args)
    : domain(args.domain), api_count(impl.api_fields.size()), scalars(args.scalars) {
  if (args.fields.size() != impl.api_fields.size())
    throw Error(ErrorCode::MissingArgument, "field argument count does not match signature");
  if (args.scalars.size() != impl.api_scalars.size())
    throw Error(ErrorCode::MissingArgument, "scalar argument count does not match signature");

  Resolver resolver;
  resolver.api_count = api_count;
  for (std::size_t f = 0; f < impl.api_fields.size(); ++f) {
    const FieldArgument &a = args.fields[f];
    View v;
    v.dtype = a.dtype;
    v.si = a.strides[0];
    v.sj = a.strides[1];
    v.sk = a.strides[2];
    v.origin = static_cast<std::byte *>(a.base) +
               static_cast<long>(size_of(a.dtype)) * v.index(a.origin[0], a.origin[1], a.origin[2]);
    views.push_back(v);
    resolver.field_slots[impl.api_fields[f].name] = static_cast<int>(f);
  }
  for (std::size_t s = 0; s < impl.api_scalars.size(); ++s)
    resolver.scalar_slots[impl.api_scalars[s].name] = static_cast<int>(s);

  for (const auto &t : impl.temporaries) {
    Index3 n;
    for (int d = 0; d < 3; ++d)
      n[d] = std::max(0L, domain[d] + t.extent.hi[d] - t.extent.lo[d]);
    const long elements = n[0] * n[1] * n[2];
    const long esize = static_cast<long>(size_of(t.dtype));
    temp_buffers_.push_back(
        acquire_zeroed(static_cast<std::size_t>(std::max(1L, elements) * esize)));
    View v;
    v.dtype = t.dtype;
    v.sk = 1;
    v.sj = n[2];
    v.si = n[2] * n[1];
    v.origin = temp_buffers_.back().data.get() +
               esize * v.index(-t.extent.lo[0], -t.extent.lo[1], -t.extent.lo[2]);
    resolver.field_slots[t.name] = static_cast<int>(views.size());
    views.push_back(v);
  }

  for (const auto &ms : impl.multistages) {
    PreparedMultiStage pms;
    pms.order = ms.order;
    for (const auto &stage : ms.stages) {
      PreparedStage ps;
      ps.k_begin = std::max(0L, stage.interval.start.resolve(domain[2]));
      ps.k_end = std::min(domain[2], stage.interval.end.resolve(domain[2]));
      ps.extent = stage.compute_extent;
      ps.block = stage.block;
      ps.body = resolver.statement(stage.body);
      pms.stages.push_back(std::move(ps));
    }
    multistages.push_back(std::move(pms));
  }
}

namespace {

void collect_writes(const Statement &s, std::vector<int> &out) {
  if (!s.is_if) {
    out.push_back(s.target);
    return;
  }
  for (const auto &t : s.then_body)
    collect_writes(t, out);
  for (const auto &t : s.else_body)
    collect_writes(t, out);
}

bool reads_shifted(const Node &n, const std::vector<int> &slots) {
  if (n.kind == Expr::Kind::field_access && (n.offset[0] != 0 || n.offset[1] != 0) &&
      std::find(slots.begin(), slots.end(), n.slot) != slots.end())
    return true;
  for (const auto &a : n.args)
    if (reads_shifted(a, slots))
      return true;
  return false;
}

bool reads_shifted(const Statement &s, const std::vector<int> &slots) {
  if (reads_shifted(s.value, slots))
    return true;
  for (const auto &t : s.then_body)
    if (reads_shifted(t, slots))
      return true;
  for (const auto &t : s.else_body)
    if (reads_shifted(t, slots))
      return true;
  return false;
}

} // namespace

bool columns_independent(const PreparedMultiStage &ms) {
  std::vector<int> written;
  for (const auto &stage : ms.stages)
    collect_writes(stage.body, written);
  for (const auto &stage : ms.stages) {
    if (stage.extent != Extent{})
      return false;
    if (reads_shifted(stage.body, written))
      return false;
  }
  return true;
}

} // namespace detail

} // namespace gts
