#include "gts/gtsf.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <vector>

namespace gts {

namespace {

constexpr char kMagic[4] = {'G', 'T', 'S', 'F'};
constexpr std::uint32_t kVersion = 1;

void put_le(std::vector<char> &out, std::uint64_t v, int bytes) {
  for (int b = 0; b < bytes; ++b)
    out.push_back(static_cast<char>((v >> (8 * b)) & 0xff));
}

std::uint64_t get_le(const unsigned char *p, int bytes) {
  std::uint64_t v = 0;
  for (int b = bytes - 1; b >= 0; --b)
    v = (v << 8) | p[b];
  return v;
}

/// Copies one element between memory and a little-endian file image.
void copy_le(unsigned char *dst, const unsigned char *src, std::size_t size) {
  if constexpr (std::endian::native == std::endian::little) {
    std::memcpy(dst, src, size);
  } else {
    for (std::size_t b = 0; b < size; ++b)
      dst[b] = src[size - 1 - b];
  }
}

} // namespace

void write_gtsf(const FieldStorage &field, std::ostream &sink) {
  std::vector<char> header;
  header.insert(header.end(), kMagic, kMagic + 4);
  put_le(header, kVersion, 4);
  put_le(header, static_cast<std::uint8_t>(field.dtype()), 1);
  put_le(header, 0, 3);
  for (long v : field.shape())
    put_le(header, static_cast<std::uint64_t>(v), 8);
  for (long v : field.origin())
    put_le(header, static_cast<std::uint64_t>(v), 8);
  sink.write(header.data(), static_cast<std::streamsize>(header.size()));

  const std::size_t esize = field.element_size();
  const Index3 &shape = field.shape();
  std::vector<unsigned char> row(static_cast<std::size_t>(shape[2]) * esize);
  for (long i = 0; i < shape[0]; ++i)
    for (long j = 0; j < shape[1]; ++j) {
      for (long k = 0; k < shape[2]; ++k)
        copy_le(row.data() + static_cast<std::size_t>(k) * esize,
                static_cast<const unsigned char *>(field.element_ptr(i, j, k)), esize);
      sink.write(reinterpret_cast<const char *>(row.data()),
                 static_cast<std::streamsize>(row.size()));
    }
  if (!sink)
    throw Error(ErrorCode::IoError, "failed to write GTSF data");
}

FieldStorage read_gtsf(std::istream &source, const LayoutSpec &layout) {
  unsigned char header[kGtsfHeaderSize];
  source.read(reinterpret_cast<char *>(header), sizeof header);
  if (source.gcount() < 4)
    throw Error(ErrorCode::TruncatedFile, "GTSF header is truncated");
  if (std::memcmp(header, kMagic, 4) != 0)
    throw Error(ErrorCode::FormatError, "bad GTSF magic");
  if (static_cast<std::size_t>(source.gcount()) < sizeof header)
    throw Error(ErrorCode::TruncatedFile, "GTSF header is truncated");
  auto version = static_cast<std::uint32_t>(get_le(header + 4, 4));
  if (version != kVersion)
    throw Error(ErrorCode::FormatError, "unsupported GTSF version " + std::to_string(version));
  std::uint8_t code = header[8];
  if (code != static_cast<std::uint8_t>(DType::f32) && code != static_cast<std::uint8_t>(DType::f64))
    throw Error(ErrorCode::FormatError, "unknown GTSF dtype code " + std::to_string(code));
  auto dtype = static_cast<DType>(code);

  Index3 shape, origin;
  for (int d = 0; d < 3; ++d) {
    std::uint64_t s = get_le(header + 12 + 8 * d, 8);
    std::uint64_t o = get_le(header + 36 + 8 * d, 8);
    if (s == 0 || s > (1ull << 40) || o >= s)
      throw Error(ErrorCode::FormatError, "invalid GTSF shape or origin");
    shape[d] = static_cast<long>(s);
    origin[d] = static_cast<long>(o);
  }

  FieldStorage field = FieldStorage::with_shape(dtype, shape, origin, layout);
  const std::size_t esize = field.element_size();
  std::vector<unsigned char> row(static_cast<std::size_t>(shape[2]) * esize);
  for (long i = 0; i < shape[0]; ++i)
    for (long j = 0; j < shape[1]; ++j) {
      source.read(reinterpret_cast<char *>(row.data()), static_cast<std::streamsize>(row.size()));
      if (static_cast<std::size_t>(source.gcount()) != row.size())
        throw Error(ErrorCode::TruncatedFile, "GTSF data ends early");
      for (long k = 0; k < shape[2]; ++k)
        copy_le(static_cast<unsigned char *>(field.element_ptr(i, j, k)),
                row.data() + static_cast<std::size_t>(k) * esize, esize);
    }
  return field;
}

void save_gtsf(const FieldStorage &field, const std::string &path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw Error(ErrorCode::IoError, "cannot open '" + path + "' for writing");
  write_gtsf(field, out);
}

FieldStorage load_gtsf(const std::string &path, const LayoutSpec &layout) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error(ErrorCode::IoError, "cannot open '" + path + "'");
  return read_gtsf(in, layout);
}

} // namespace gts
