#include <doctest.h>

#include <zlib.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

#include "voleval/nifti.hpp"

using namespace voleval;
namespace fs = std::filesystem;

namespace {

fs::path test_dir() {
  const fs::path dir = fs::temp_directory_path() / "voleval_nifti_tests";
  fs::create_directories(dir);
  return dir;
}

// Hand-built NIfTI-1 bytes, independent of the production writer. When
// big_endian is set every multi-byte field and voxel is byte-swapped.
struct RawNifti {
  std::vector<std::uint8_t> bytes = std::vector<std::uint8_t>(352, 0);
  bool big_endian = false;

  void u16(std::size_t off, std::uint16_t v) {
    if (big_endian) {
      bytes[off] = static_cast<std::uint8_t>(v >> 8);
      bytes[off + 1] = static_cast<std::uint8_t>(v & 0xFF);
    } else {
      bytes[off] = static_cast<std::uint8_t>(v & 0xFF);
      bytes[off + 1] = static_cast<std::uint8_t>(v >> 8);
    }
  }
  void u32(std::size_t off, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) {
      const int shift = big_endian ? 8 * (3 - i) : 8 * i;
      bytes[off + i] = static_cast<std::uint8_t>((v >> shift) & 0xFF);
    }
  }
  void f32(std::size_t off, float v) {
    std::uint32_t u;
    std::memcpy(&u, &v, 4);
    u32(off, u);
  }

  void standard_header(int nx, int ny, int nz, float dx, float dy, float dz,
                       int datatype, int bitpix) {
    u32(0, 348);
    u16(40, 3);
    u16(42, static_cast<std::uint16_t>(nx));
    u16(44, static_cast<std::uint16_t>(ny));
    u16(46, static_cast<std::uint16_t>(nz));
    for (int i = 4; i < 8; ++i) u16(40 + 2 * i, 1);
    u16(70, static_cast<std::uint16_t>(datatype));
    u16(72, static_cast<std::uint16_t>(bitpix));
    f32(80, dx);
    f32(84, dy);
    f32(88, dz);
    f32(108, 352.0f);
    bytes[344] = 'n';
    bytes[345] = '+';
    bytes[346] = '1';
    bytes[347] = '\0';
  }

  void append_u8(std::uint8_t v) { bytes.push_back(v); }
  void append_i16(std::int16_t v) {
    const auto u = static_cast<std::uint16_t>(v);
    if (big_endian) {
      bytes.push_back(static_cast<std::uint8_t>(u >> 8));
      bytes.push_back(static_cast<std::uint8_t>(u & 0xFF));
    } else {
      bytes.push_back(static_cast<std::uint8_t>(u & 0xFF));
      bytes.push_back(static_cast<std::uint8_t>(u >> 8));
    }
  }
  void append_f32(float v) {
    std::uint32_t u;
    std::memcpy(&u, &v, 4);
    for (int i = 0; i < 4; ++i) {
      const int shift = big_endian ? 8 * (3 - i) : 8 * i;
      bytes.push_back(static_cast<std::uint8_t>((u >> shift) & 0xFF));
    }
  }

  void write(const fs::path& p) const {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
  }

  void write_gz(const fs::path& p) const {
    gzFile gz = gzopen(p.string().c_str(), "wb");
    REQUIRE(gz != nullptr);
    gzwrite(gz, bytes.data(), static_cast<unsigned>(bytes.size()));
    gzclose(gz);
  }
};

}  // namespace

TEST_CASE("minimal hand-built header loads with the declared geometry") {
  RawNifti raw;
  raw.standard_header(4, 4, 4, 0.5f, 0.5f, 0.5f, 2, 8);
  for (int i = 0; i < 64; ++i) raw.append_u8(static_cast<std::uint8_t>(i));
  const fs::path p = test_dir() / "minimal.nii";
  raw.write(p);

  const VoxelGrid g = load_volume(p);
  CHECK(g.dims == std::array<int, 3>{4, 4, 4});
  CHECK(g.spacing == std::array<double, 3>{0.5, 0.5, 0.5});
  CHECK(g.kind == ScalarKind::UInt8);
  CHECK(g.voxel_count() == 64);
  CHECK(g.value_at(0) == 0.0);
  CHECK(g.value_at(63) == 63.0);

  SUBCASE("the same bytes gzip-compressed load identically") {
    const fs::path pz = test_dir() / "minimal.nii.gz";
    raw.write_gz(pz);
    const VoxelGrid z = load_volume(pz);
    CHECK(z.dims == g.dims);
    CHECK(z.spacing == g.spacing);
    CHECK(std::get<std::vector<std::uint8_t>>(z.data) ==
          std::get<std::vector<std::uint8_t>>(g.data));
  }
}

TEST_CASE("big-endian files are detected and byte-swapped") {
  RawNifti raw;
  raw.big_endian = true;
  raw.standard_header(3, 2, 2, 0.3f, 0.3f, 0.6f, 4, 16);
  for (int i = 0; i < 12; ++i) raw.append_i16(static_cast<std::int16_t>(100 - 17 * i));
  const fs::path p = test_dir() / "bigendian.nii";
  raw.write(p);

  const VoxelGrid g = load_volume(p);
  CHECK(g.dims == std::array<int, 3>{3, 2, 2});
  CHECK(g.spacing[0] == doctest::Approx(0.3).epsilon(1e-7));
  CHECK(g.spacing[2] == doctest::Approx(0.6).epsilon(1e-7));
  const auto& data = std::get<std::vector<std::int16_t>>(g.data);
  for (int i = 0; i < 12; ++i) CHECK(data[i] == 100 - 17 * i);
}

TEST_CASE("scl_slope/scl_inter rescale to float32") {
  RawNifti raw;
  raw.standard_header(2, 1, 1, 1.0f, 1.0f, 1.0f, 2, 8);
  raw.f32(112, 2.0f);  // scl_slope
  raw.f32(116, 1.0f);  // scl_inter
  raw.append_u8(10);
  raw.append_u8(20);
  const fs::path p = test_dir() / "scaled.nii";
  raw.write(p);

  const VoxelGrid g = load_volume(p);
  CHECK(g.kind == ScalarKind::Float32);
  CHECK(g.value_at(0) == 21.0);
  CHECK(g.value_at(1) == 41.0);
}

TEST_CASE("scl_slope of zero means identity") {
  RawNifti raw;
  raw.standard_header(1, 1, 1, 1.0f, 1.0f, 1.0f, 2, 8);
  raw.f32(112, 0.0f);
  raw.f32(116, 5.0f);  // ignored when slope == 0
  raw.append_u8(7);
  const fs::path p = test_dir() / "noscale.nii";
  raw.write(p);
  const VoxelGrid g = load_volume(p);
  CHECK(g.kind == ScalarKind::UInt8);
  CHECK(g.value_at(0) == 7.0);
}

TEST_CASE("malformed files are rejected with the right error class") {
  const fs::path dir = test_dir();

  SUBCASE("wrong sizeof_hdr in either byte order") {
    RawNifti raw;
    raw.standard_header(1, 1, 1, 1, 1, 1, 2, 8);
    raw.u32(0, 340);
    raw.append_u8(0);
    raw.write(dir / "badhdr.nii");
    CHECK_THROWS_AS(load_volume(dir / "badhdr.nii"), FormatError);
  }
  SUBCASE("wrong magic") {
    RawNifti raw;
    raw.standard_header(1, 1, 1, 1, 1, 1, 2, 8);
    raw.bytes[345] = 'i';
    raw.append_u8(0);
    raw.write(dir / "badmagic.nii");
    CHECK_THROWS_AS(load_volume(dir / "badmagic.nii"), FormatError);
  }
  SUBCASE("4D volume") {
    RawNifti raw;
    raw.standard_header(2, 2, 2, 1, 1, 1, 2, 8);
    raw.u16(40, 4);
    raw.u16(48, 3);  // dim[4]
    for (int i = 0; i < 24; ++i) raw.append_u8(0);
    raw.write(dir / "fourd.nii");
    CHECK_THROWS_AS(load_volume(dir / "fourd.nii"), UnsupportedShapeError);
  }
  SUBCASE("unsupported datatype") {
    RawNifti raw;
    raw.standard_header(1, 1, 1, 1, 1, 1, 64, 64);  // float64
    for (int i = 0; i < 8; ++i) raw.append_u8(0);
    raw.write(dir / "badtype.nii");
    CHECK_THROWS_AS(load_volume(dir / "badtype.nii"), UnsupportedTypeError);
  }
  SUBCASE("truncated data section") {
    RawNifti raw;
    raw.standard_header(4, 4, 4, 1, 1, 1, 2, 8);
    for (int i = 0; i < 32; ++i) raw.append_u8(1);  // half of 64
    raw.write(dir / "trunc.nii");
    CHECK_THROWS_AS(load_volume(dir / "trunc.nii"), IoError);
  }
  SUBCASE("bitpix disagreeing with datatype") {
    RawNifti raw;
    raw.standard_header(1, 1, 1, 1, 1, 1, 2, 16);
    raw.append_u8(0);
    raw.write(dir / "badbitpix.nii");
    CHECK_THROWS_AS(load_volume(dir / "badbitpix.nii"), FormatError);
  }
  SUBCASE("zero pixdim") {
    RawNifti raw;
    raw.standard_header(1, 1, 1, 0.0f, 1, 1, 2, 8);
    raw.append_u8(0);
    raw.write(dir / "zeropix.nii");
    CHECK_THROWS_AS(load_volume(dir / "zeropix.nii"), FormatError);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_volume(dir / "does_not_exist.nii"), IoError);
  }
}

TEST_CASE("save_volume writes files load_volume inverts") {
  const fs::path dir = test_dir();

  SUBCASE("one-voxel grid") {
    VoxelGrid g = make_uint8_grid({1, 1, 1}, {1.0, 1.0, 1.0});
    std::get<std::vector<std::uint8_t>>(g.data)[0] = 1;
    save_volume(g, dir / "one.nii");
    const VoxelGrid r = load_volume(dir / "one.nii");
    CHECK(r.value_at(0) == 1.0);
  }

  SUBCASE("spacing 0.3 survives as its float32 representation") {
    VoxelGrid g = make_uint8_grid({2, 2, 2}, {0.3, 0.3, 0.3});
    save_volume(g, dir / "sp03.nii");
    const VoxelGrid r = load_volume(dir / "sp03.nii");
    for (int a = 0; a < 3; ++a)
      CHECK(r.spacing[a] == static_cast<double>(0.3f));
  }

  SUBCASE("unwritable path") {
    const VoxelGrid g = make_uint8_grid({1, 1, 1}, {1, 1, 1});
    CHECK_THROWS_AS(save_volume(g, dir / "no_such_dir" / "x.nii"), IoError);
  }
}

TEST_CASE("round-trip is bit-exact across datatypes, gzip and seeds") {
  const fs::path dir = test_dir();
  std::mt19937 rng(11);
  std::uniform_int_distribution<int> dim(1, 9);
  std::uniform_real_distribution<double> sp(0.25, 0.8);

  for (int trial = 0; trial < 30; ++trial) {
    VoxelGrid g;
    g.dims = {dim(rng), dim(rng), dim(rng)};
    g.spacing = {sp(rng), sp(rng), sp(rng)};
    const std::size_t n = g.voxel_count();
    switch (trial % 3) {
      case 0: {
        g.kind = ScalarKind::UInt8;
        std::vector<std::uint8_t> d(n);
        for (auto& v : d) v = static_cast<std::uint8_t>(rng() & 0xFF);
        g.data = std::move(d);
        break;
      }
      case 1: {
        g.kind = ScalarKind::Int16;
        std::vector<std::int16_t> d(n);
        for (auto& v : d) v = static_cast<std::int16_t>(rng() & 0xFFFF);
        g.data = std::move(d);
        break;
      }
      default: {
        g.kind = ScalarKind::Float32;
        std::vector<float> d(n);
        std::uniform_real_distribution<float> fv(-10.0f, 10.0f);
        for (auto& v : d) v = fv(rng);
        g.data = std::move(d);
        break;
      }
    }

    const fs::path p = dir / (std::string("rt") + std::to_string(trial) +
                              (trial % 2 ? ".nii.gz" : ".nii"));
    save_volume(g, p);
    const VoxelGrid r = load_volume(p);
    CHECK(r.dims == g.dims);
    for (int a = 0; a < 3; ++a)
      CHECK(r.spacing[a] == static_cast<double>(static_cast<float>(g.spacing[a])));
    CHECK(r.kind == g.kind);
    CHECK(r.data == g.data);
  }
}

TEST_CASE("gzip output bytes are reproducible") {
  const fs::path dir = test_dir();
  VoxelGrid g = make_uint8_grid({6, 5, 4}, {0.5, 0.5, 0.5});
  auto& d = std::get<std::vector<std::uint8_t>>(g.data);
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = i % 3 == 0;
  save_volume(g, dir / "a.nii.gz");
  save_volume(g, dir / "b.nii.gz");
  std::ifstream fa(dir / "a.nii.gz", std::ios::binary);
  std::ifstream fb(dir / "b.nii.gz", std::ios::binary);
  const std::string sa((std::istreambuf_iterator<char>(fa)),
                       std::istreambuf_iterator<char>());
  const std::string sb((std::istreambuf_iterator<char>(fb)),
                       std::istreambuf_iterator<char>());
  CHECK(sa == sb);
  CHECK(sa.size() > 2);
  CHECK(static_cast<unsigned char>(sa[0]) == 0x1F);
  CHECK(static_cast<unsigned char>(sa[1]) == 0x8B);
}
