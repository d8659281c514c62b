#pragma once

#include "gts/common.hpp"

#include <cstddef>
#include <memory>

namespace gts {

/// Memory layout of a 3-D field.
struct LayoutSpec {
  /// Axis order from outermost to innermost; (0,1,2) makes k contiguous.
  std::array<int, 3> permutation{0, 1, 2};
  /// Power of two, at least the element size. The origin element and the
  /// start of every innermost row are aligned to it.
  std::size_t alignment_bytes = 64;
  Index3 halo_default{0, 0, 0};

  friend bool operator==(const LayoutSpec &, const LayoutSpec &) = default;
};

/// Throws InvalidLayout unless `layout` is usable for `dtype`.
void validate_layout(const LayoutSpec &layout, DType dtype);

struct Fill {
  enum class Kind { zeros, value, poison };
  Kind kind = Kind::zeros;
  double value = 0.0;

  static Fill zeros() { return {}; }
  static Fill constant(double v) { return {Kind::value, v}; }
  /// Quiet NaN in every element, padding included.
  static Fill poison() { return {Kind::poison, 0.0}; }
};

/// Non-owning view of a field's memory for external consumers.
struct BufferDescriptor {
  void *base = nullptr; ///< element at logical index (0,0,0)
  DType dtype = DType::f64;
  Index3 shape{0, 0, 0};
  Index3 byte_strides{0, 0, 0};
  bool read_only = false;
};

/// Owning 3-D element buffer. Copies are deep.
class FieldStorage {
public:
  FieldStorage() = default;
  FieldStorage(const FieldStorage &other);
  FieldStorage &operator=(const FieldStorage &other);
  FieldStorage(FieldStorage &&) noexcept = default;
  FieldStorage &operator=(FieldStorage &&) noexcept = default;
  ~FieldStorage() = default;

  /// shape = compute_shape + 2*halo, origin = halo.
  static FieldStorage allocate(DType dtype, Index3 compute_shape, Index3 halo,
                               const LayoutSpec &layout = {}, Fill fill = Fill::zeros());

  /// Explicit total shape and origin.
  static FieldStorage with_shape(DType dtype, Index3 shape, Index3 origin,
                                 const LayoutSpec &layout = {}, Fill fill = Fill::zeros());

  DType dtype() const { return dtype_; }
  const Index3 &shape() const { return shape_; }
  const Index3 &origin() const { return origin_; }
  const LayoutSpec &layout() const { return layout_; }
  /// Element strides per logical axis.
  const Index3 &strides() const { return strides_; }
  std::size_t element_size() const { return size_of(dtype_); }

  /// Address of the element at logical index (0,0,0).
  void *data() { return base_; }
  const void *data() const { return base_; }

  void *element_ptr(long i, long j, long k) {
    return static_cast<std::byte *>(base_) + byte_offset(i, j, k);
  }
  const void *element_ptr(long i, long j, long k) const {
    return static_cast<const std::byte *>(base_) + byte_offset(i, j, k);
  }

  /// Element value widened to double.
  double get(long i, long j, long k) const;
  /// Stores `value`, rounding to float for f32 fields.
  void set(long i, long j, long k, double value);

  /// Allocation bounds, padding included, for aliasing checks.
  const std::byte *allocation_begin() const { return block_.get(); }
  const std::byte *allocation_end() const { return block_.get() + block_bytes_; }

  BufferDescriptor export_descriptor(bool read_only = false);

  bool empty() const { return !block_; }

private:
  struct FreeDeleter {
    void operator()(std::byte *p) const;
  };

  long byte_offset(long i, long j, long k) const {
    return static_cast<long>(element_size()) *
           (i * strides_[0] + j * strides_[1] + k * strides_[2]);
  }

  DType dtype_ = DType::f64;
  Index3 shape_{0, 0, 0};
  Index3 origin_{0, 0, 0};
  LayoutSpec layout_;
  Index3 strides_{0, 0, 0};
  std::unique_ptr<std::byte[], FreeDeleter> block_;
  std::size_t block_bytes_ = 0;
  void *base_ = nullptr;
};

} // namespace gts
