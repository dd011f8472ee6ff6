#include "voleval/nifti.hpp"

#include <zlib.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

namespace voleval {

namespace {

constexpr int kHeaderSize = 348;
constexpr int kVoxOffset = 352;

constexpr std::int16_t kDtUInt8 = 2;
constexpr std::int16_t kDtInt16 = 4;
constexpr std::int16_t kDtFloat32 = 16;

// Little-endian field codecs. The writer always emits little-endian;
// the reader byte-swaps when the header announces the other order.

void put_i16(std::vector<std::uint8_t>& b, std::size_t off, std::int16_t v) {
  const auto u = static_cast<std::uint16_t>(v);
  b[off] = static_cast<std::uint8_t>(u & 0xFF);
  b[off + 1] = static_cast<std::uint8_t>(u >> 8);
}

void put_i32(std::vector<std::uint8_t>& b, std::size_t off, std::int32_t v) {
  const auto u = static_cast<std::uint32_t>(v);
  for (int i = 0; i < 4; ++i)
    b[off + i] = static_cast<std::uint8_t>((u >> (8 * i)) & 0xFF);
}

void put_f32(std::vector<std::uint8_t>& b, std::size_t off, float v) {
  std::uint32_t u;
  std::memcpy(&u, &v, 4);
  for (int i = 0; i < 4; ++i)
    b[off + i] = static_cast<std::uint8_t>((u >> (8 * i)) & 0xFF);
}

std::int16_t get_i16(const std::uint8_t* b, bool swap) {
  std::uint16_t u = static_cast<std::uint16_t>(b[0]) |
                    (static_cast<std::uint16_t>(b[1]) << 8);
  if (swap) u = static_cast<std::uint16_t>((u >> 8) | (u << 8));
  std::int16_t v;
  std::memcpy(&v, &u, 2);
  return v;
}

std::uint32_t get_u32_raw(const std::uint8_t* b, bool swap) {
  std::uint32_t u = static_cast<std::uint32_t>(b[0]) |
                    (static_cast<std::uint32_t>(b[1]) << 8) |
                    (static_cast<std::uint32_t>(b[2]) << 16) |
                    (static_cast<std::uint32_t>(b[3]) << 24);
  if (swap)
    u = (u >> 24) | ((u >> 8) & 0xFF00u) | ((u << 8) & 0xFF0000u) | (u << 24);
  return u;
}

std::int32_t get_i32(const std::uint8_t* b, bool swap) {
  const std::uint32_t u = get_u32_raw(b, swap);
  std::int32_t v;
  std::memcpy(&v, &u, 4);
  return v;
}

float get_f32(const std::uint8_t* b, bool swap) {
  const std::uint32_t u = get_u32_raw(b, swap);
  float v;
  std::memcpy(&v, &u, 4);
  return v;
}

bool is_gzip(const std::vector<std::uint8_t>& bytes) {
  return bytes.size() >= 2 && bytes[0] == 0x1F && bytes[1] == 0x8B;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file: " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed: " + path.string());
  return bytes;
}

std::vector<std::uint8_t> gunzip(const std::vector<std::uint8_t>& in,
                                 const std::string& name) {
  z_stream zs{};
  if (inflateInit2(&zs, 15 + 32) != Z_OK)
    throw IoError("zlib init failed: " + name);
  std::vector<std::uint8_t> out;
  out.reserve(in.size() * 4);
  std::uint8_t buf[1 << 16];
  zs.next_in = const_cast<Bytef*>(in.data());
  zs.avail_in = static_cast<uInt>(in.size());
  int rc = Z_OK;
  do {
    zs.next_out = buf;
    zs.avail_out = sizeof(buf);
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      throw IoError("gzip stream corrupt or truncated: " + name);
    }
    out.insert(out.end(), buf, buf + (sizeof(buf) - zs.avail_out));
  } while (rc != Z_STREAM_END && zs.avail_in > 0);
  inflateEnd(&zs);
  if (rc != Z_STREAM_END)
    throw IoError("gzip stream truncated: " + name);
  return out;
}

// gzip with a fixed header (mtime 0, unknown OS) so compressed output
// is byte-reproducible run to run.
std::vector<std::uint8_t> gzip_compress(const std::vector<std::uint8_t>& in,
                                        const std::string& name) {
  z_stream zs{};
  if (deflateInit2(&zs, Z_DEFAULT_COMPRESSION, Z_DEFLATED, 15 + 16, 8,
                   Z_DEFAULT_STRATEGY) != Z_OK)
    throw IoError("zlib init failed: " + name);
  gz_header gzh{};
  gzh.time = 0;
  gzh.os = 255;
  deflateSetHeader(&zs, &gzh);
  std::vector<std::uint8_t> out;
  out.reserve(in.size() / 2 + 64);
  std::uint8_t buf[1 << 16];
  zs.next_in = const_cast<Bytef*>(in.data());
  zs.avail_in = static_cast<uInt>(in.size());
  int rc = Z_OK;
  do {
    zs.next_out = buf;
    zs.avail_out = sizeof(buf);
    rc = deflate(&zs, Z_FINISH);
    out.insert(out.end(), buf, buf + (sizeof(buf) - zs.avail_out));
  } while (rc == Z_OK);
  deflateEnd(&zs);
  if (rc != Z_STREAM_END) throw IoError("gzip compression failed: " + name);
  return out;
}

template <typename T>
std::vector<T> decode_voxels(const std::uint8_t* src, std::size_t n, bool swap);

template <>
std::vector<std::uint8_t> decode_voxels(const std::uint8_t* src, std::size_t n,
                                        bool) {
  return std::vector<std::uint8_t>(src, src + n);
}

template <>
std::vector<std::int16_t> decode_voxels(const std::uint8_t* src, std::size_t n,
                                        bool swap) {
  std::vector<std::int16_t> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = get_i16(src + 2 * i, swap);
  return v;
}

template <>
std::vector<float> decode_voxels(const std::uint8_t* src, std::size_t n,
                                 bool swap) {
  std::vector<float> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = get_f32(src + 4 * i, swap);
  return v;
}

}  // namespace

VoxelGrid load_volume(const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes = read_file(path);
  if (is_gzip(bytes)) bytes = gunzip(bytes, path.string());

  if (bytes.size() < static_cast<std::size_t>(kHeaderSize))
    throw FormatError("file shorter than NIfTI-1 header: " + path.string());

  bool swap = false;
  const std::int32_t hdr_le = get_i32(bytes.data(), false);
  if (hdr_le != kHeaderSize) {
    const std::int32_t hdr_be = get_i32(bytes.data(), true);
    if (hdr_be != kHeaderSize)
      throw FormatError("bad sizeof_hdr, not a NIfTI-1 file: " + path.string());
    swap = true;
  }

  if (!(bytes[344] == 'n' && bytes[345] == '+' && bytes[346] == '1' &&
        bytes[347] == '\0'))
    throw FormatError("bad magic, expected single-file NIfTI-1 (\"n+1\"): " +
                      path.string());

  std::int16_t dim[8];
  for (int i = 0; i < 8; ++i) dim[i] = get_i16(bytes.data() + 40 + 2 * i, swap);
  if (dim[0] != 3)
    throw UnsupportedShapeError("only 3D volumes are supported, dim[0]=" +
                                std::to_string(dim[0]) + ": " + path.string());
  for (int a = 1; a <= 3; ++a)
    if (dim[a] <= 0)
      throw FormatError("non-positive dimension in header: " + path.string());

  const std::int16_t datatype = get_i16(bytes.data() + 70, swap);
  const std::int16_t bitpix = get_i16(bytes.data() + 72, swap);
  ScalarKind kind;
  switch (datatype) {
    case kDtUInt8: kind = ScalarKind::UInt8; break;
    case kDtInt16: kind = ScalarKind::Int16; break;
    case kDtFloat32: kind = ScalarKind::Float32; break;
    default:
      throw UnsupportedTypeError("unsupported datatype code " +
                                 std::to_string(datatype) + ": " +
                                 path.string());
  }
  if (bitpix != 8 * bytes_per_voxel(kind))
    throw FormatError("bitpix disagrees with datatype: " + path.string());

  float pixdim[8];
  for (int i = 0; i < 8; ++i)
    pixdim[i] = get_f32(bytes.data() + 76 + 4 * i, swap);
  const float vox_offset = get_f32(bytes.data() + 108, swap);
  const float scl_slope = get_f32(bytes.data() + 112, swap);
  const float scl_inter = get_f32(bytes.data() + 116, swap);

  VoxelGrid g;
  g.dims = {dim[1], dim[2], dim[3]};
  for (int a = 0; a < 3; ++a) {
    g.spacing[a] = std::fabs(static_cast<double>(pixdim[a + 1]));
    if (!(g.spacing[a] > 0.0) || !std::isfinite(g.spacing[a]))
      throw FormatError("non-positive pixdim in header: " + path.string());
  }

  // World offset: prefer the sform translation, fall back to the qform
  // offsets. Orientation beyond spacing is ignored by the metrics.
  const std::int16_t qform_code = get_i16(bytes.data() + 252, swap);
  const std::int16_t sform_code = get_i16(bytes.data() + 254, swap);
  if (sform_code > 0) {
    g.origin = {get_f32(bytes.data() + 280 + 12, swap),
                get_f32(bytes.data() + 296 + 12, swap),
                get_f32(bytes.data() + 312 + 12, swap)};
  } else if (qform_code > 0) {
    g.origin = {get_f32(bytes.data() + 268, swap),
                get_f32(bytes.data() + 272, swap),
                get_f32(bytes.data() + 276, swap)};
  }

  const std::size_t n = static_cast<std::size_t>(dim[1]) * dim[2] * dim[3];
  std::int64_t offset = static_cast<std::int64_t>(vox_offset);
  if (offset < kHeaderSize) offset = kVoxOffset;
  const std::size_t need =
      static_cast<std::size_t>(offset) + n * bytes_per_voxel(kind);
  if (bytes.size() < need)
    throw IoError("data section truncated: " + path.string());

  const std::uint8_t* src = bytes.data() + offset;
  switch (kind) {
    case ScalarKind::UInt8:
      g.data = decode_voxels<std::uint8_t>(src, n, swap);
      break;
    case ScalarKind::Int16:
      g.data = decode_voxels<std::int16_t>(src, n, swap);
      break;
    case ScalarKind::Float32:
      g.data = decode_voxels<float>(src, n, swap);
      break;
  }
  g.kind = kind;

  // scl_slope == 0 means no scaling by convention; an identity pair
  // keeps the on-disk type so round-trips stay bit-exact.
  const bool identity = (scl_slope == 0.0f) ||
                        (scl_slope == 1.0f && scl_inter == 0.0f);
  if (!identity) {
    std::vector<float> scaled(n);
    std::visit(
        [&](const auto& v) {
          for (std::size_t i = 0; i < n; ++i)
            scaled[i] = static_cast<float>(v[i]) * scl_slope + scl_inter;
        },
        g.data);
    g.data = std::move(scaled);
    g.kind = ScalarKind::Float32;
  }

  g.validate();
  return g;
}

void save_volume(const VoxelGrid& grid, const std::filesystem::path& path) {
  grid.validate();

  std::vector<std::uint8_t> bytes(kVoxOffset, 0);
  put_i32(bytes, 0, kHeaderSize);
  put_i16(bytes, 40, 3);  // dim[0]
  for (int a = 0; a < 3; ++a) {
    if (grid.dims[a] > std::numeric_limits<std::int16_t>::max())
      throw FormatError("dimension too large for NIfTI-1 header");
    put_i16(bytes, 42 + 2 * a, static_cast<std::int16_t>(grid.dims[a]));
  }
  for (int i = 4; i < 8; ++i) put_i16(bytes, 40 + 2 * i, 1);

  std::int16_t datatype = kDtUInt8;
  switch (grid.kind) {
    case ScalarKind::UInt8: datatype = kDtUInt8; break;
    case ScalarKind::Int16: datatype = kDtInt16; break;
    case ScalarKind::Float32: datatype = kDtFloat32; break;
  }
  put_i16(bytes, 70, datatype);
  put_i16(bytes, 72, static_cast<std::int16_t>(8 * bytes_per_voxel(grid.kind)));

  put_f32(bytes, 76, 1.0f);  // pixdim[0] (qfac)
  for (int a = 0; a < 3; ++a)
    put_f32(bytes, 80 + 4 * a, static_cast<float>(grid.spacing[a]));
  put_f32(bytes, 108, static_cast<float>(kVoxOffset));
  put_f32(bytes, 112, 1.0f);  // scl_slope: explicit identity
  put_f32(bytes, 116, 0.0f);  // scl_inter
  bytes[123] = 2;             // xyzt_units: millimetres

  // Diagonal sform carrying spacing and origin.
  put_i16(bytes, 254, 1);  // sform_code
  put_f32(bytes, 280, static_cast<float>(grid.spacing[0]));
  put_f32(bytes, 296 + 4, static_cast<float>(grid.spacing[1]));
  put_f32(bytes, 312 + 8, static_cast<float>(grid.spacing[2]));
  put_f32(bytes, 280 + 12, static_cast<float>(grid.origin[0]));
  put_f32(bytes, 296 + 12, static_cast<float>(grid.origin[1]));
  put_f32(bytes, 312 + 12, static_cast<float>(grid.origin[2]));

  bytes[344] = 'n';
  bytes[345] = '+';
  bytes[346] = '1';
  bytes[347] = '\0';

  const std::size_t n = grid.voxel_count();
  bytes.reserve(kVoxOffset + n * bytes_per_voxel(grid.kind));
  std::visit(
      [&](const auto& v) {
        using T = typename std::decay_t<decltype(v)>::value_type;
        for (std::size_t i = 0; i < n; ++i) {
          if constexpr (sizeof(T) == 1) {
            bytes.push_back(v[i]);
          } else if constexpr (sizeof(T) == 2) {
            std::uint16_t u;
            std::memcpy(&u, &v[i], 2);
            bytes.push_back(static_cast<std::uint8_t>(u & 0xFF));
            bytes.push_back(static_cast<std::uint8_t>(u >> 8));
          } else {
            std::uint32_t u;
            std::memcpy(&u, &v[i], 4);
            for (int k = 0; k < 4; ++k)
              bytes.push_back(static_cast<std::uint8_t>((u >> (8 * k)) & 0xFF));
          }
        }
      },
      grid.data);

  const bool gz = path.extension() == ".gz";
  if (gz) bytes = gzip_compress(bytes, path.string());

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace voleval
