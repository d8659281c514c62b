#pragma once

#include "gts/storage.hpp"

#include <iosfwd>
#include <string>

namespace gts {

/// GTSF file layout (little-endian):
///   "GTSF" | u32 version = 1 | u8 dtype (1 = f32, 2 = f64) | u8[3] reserved |
///   u64[3] shape | u64[3] origin | elements in logical order (i outermost,
///   k innermost).
inline constexpr std::size_t kGtsfHeaderSize = 60;

void write_gtsf(const FieldStorage &field, std::ostream &sink);

/// Reads a field and lays it out according to `layout`.
/// Errors: FormatError (bad magic, version or dtype), TruncatedFile.
FieldStorage read_gtsf(std::istream &source, const LayoutSpec &layout = {});

void save_gtsf(const FieldStorage &field, const std::string &path);
FieldStorage load_gtsf(const std::string &path, const LayoutSpec &layout = {});

} // namespace gts
