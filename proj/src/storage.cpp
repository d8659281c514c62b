#include "gts/storage.hpp"

#include <cstdlib>
#include <cstring>
#include <limits>
#include <algorithm>

namespace gts {

void validate_layout(const LayoutSpec &layout, DType dtype) {
  std::array<bool, 3> seen{};
  for (int axis : layout.permutation) {
    if (axis < 0 || axis > 2 || seen[static_cast<std::size_t>(axis)])
      throw Error(ErrorCode::InvalidLayout, "layout permutation must be a permutation of 0,1,2");
    seen[static_cast<std::size_t>(axis)] = true;
  }
  std::size_t a = layout.alignment_bytes;
  if (a == 0 || (a & (a - 1)) != 0 || a < size_of(dtype))
    throw Error(ErrorCode::InvalidLayout,
                "alignment must be a power of two of at least the element size, got " +
                    std::to_string(a));
}

void FieldStorage::FreeDeleter::operator()(std::byte *p) const {
  std::free(p);
}

namespace {

/// Block aligned to `alignment`, so the leading pad alone aligns the origin.
std::byte *aligned_block(std::size_t bytes, std::size_t alignment) {
  std::size_t rounded = (bytes + alignment - 1) / alignment * alignment;
  void *p = std::aligned_alloc(alignment, rounded);
  if (!p)
    throw Error(ErrorCode::AllocationError,
                "cannot allocate " + std::to_string(bytes) + " bytes");
  return static_cast<std::byte *>(p);
}

} // namespace

FieldStorage FieldStorage::allocate(DType dtype, Index3 compute_shape, Index3 halo,
                                    const LayoutSpec &layout, Fill fill) {
  Index3 shape;
  for (int d = 0; d < 3; ++d) {
    if (compute_shape[d] < 1)
      throw Error(ErrorCode::AllocationError, "compute shape must be at least 1 per axis");
    if (halo[d] < 0)
      throw Error(ErrorCode::AllocationError, "halo must be nonnegative");
    shape[d] = compute_shape[d] + 2 * halo[d];
  }
  return with_shape(dtype, shape, halo, layout, fill);
}

FieldStorage FieldStorage::with_shape(DType dtype, Index3 shape, Index3 origin,
                                      const LayoutSpec &layout, Fill fill) {
  validate_layout(layout, dtype);
  for (int d = 0; d < 3; ++d) {
    if (shape[d] < 1)
      throw Error(ErrorCode::AllocationError, "shape must be at least 1 per axis");
    if (origin[d] < 0 || origin[d] >= shape[d])
      throw Error(ErrorCode::AllocationError, "origin must lie inside the shape");
  }

  FieldStorage f;
  f.dtype_ = dtype;
  f.shape_ = shape;
  f.origin_ = origin;
  f.layout_ = layout;

  const long esize = static_cast<long>(size_of(dtype));
  const long align_elems = static_cast<long>(layout.alignment_bytes) / esize;
  const int outer = layout.permutation[0];
  const int middle = layout.permutation[1];
  const int inner = layout.permutation[2];
  const long padded_inner = (shape[inner] + align_elems - 1) / align_elems * align_elems;
  f.strides_[inner] = 1;
  f.strides_[middle] = padded_inner;
  f.strides_[outer] = padded_inner * shape[middle];
  const long total = f.strides_[outer] * shape[outer];

  long origin_offset = 0;
  for (int d = 0; d < 3; ++d)
    origin_offset += origin[d] * f.strides_[d];
  const long lead = (align_elems - origin_offset % align_elems) % align_elems;

  const long elements = lead + total;
  if (elements > std::numeric_limits<long>::max() / esize / 2)
    throw Error(ErrorCode::AllocationError, "field is too large");
  f.block_bytes_ = static_cast<std::size_t>(elements * esize);
  f.block_.reset(aligned_block(f.block_bytes_, layout.alignment_bytes));
  f.base_ = f.block_.get() + lead * esize;

  switch (fill.kind) {
  case Fill::Kind::zeros:
    std::memset(f.block_.get(), 0, f.block_bytes_);
    break;
  case Fill::Kind::value:
  case Fill::Kind::poison: {
    double v = fill.kind == Fill::Kind::poison ? std::numeric_limits<double>::quiet_NaN()
                                                : fill.value;
    if (dtype == DType::f64) {
      auto *p = reinterpret_cast<double *>(f.block_.get());
      std::fill(p, p + elements, v);
    } else {
      auto *p = reinterpret_cast<float *>(f.block_.get());
      std::fill(p, p + elements, static_cast<float>(v));
    }
    break;
  }
  }
  return f;
}

FieldStorage::FieldStorage(const FieldStorage &other)
    : dtype_(other.dtype_), shape_(other.shape_), origin_(other.origin_),
      layout_(other.layout_), strides_(other.strides_), block_bytes_(other.block_bytes_) {
  if (!other.block_)
    return;
  block_.reset(aligned_block(block_bytes_, layout_.alignment_bytes));
  std::memcpy(block_.get(), other.block_.get(), block_bytes_);
  base_ = block_.get() + (static_cast<const std::byte *>(other.base_) - other.block_.get());
}

FieldStorage &FieldStorage::operator=(const FieldStorage &other) {
  if (this != &other) {
    FieldStorage copy(other);
    *this = std::move(copy);
  }
  return *this;
}

double FieldStorage::get(long i, long j, long k) const {
  const void *p = element_ptr(i, j, k);
  if (dtype_ == DType::f64)
    return *static_cast<const double *>(p);
  return *static_cast<const float *>(p);
}

void FieldStorage::set(long i, long j, long k, double value) {
  void *p = element_ptr(i, j, k);
  if (dtype_ == DType::f64)
    *static_cast<double *>(p) = value;
  else
    *static_cast<float *>(p) = static_cast<float>(value);
}

BufferDescriptor FieldStorage::export_descriptor(bool read_only) {
  BufferDescriptor d;
  d.base = base_;
  d.dtype = dtype_;
  d.shape = shape_;
  for (int a = 0; a < 3; ++a)
    d.byte_strides[a] = strides_[a] * static_cast<long>(element_size());
  d.read_only = read_only;
  return d;
}

} // namespace gts
