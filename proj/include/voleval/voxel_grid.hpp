#pragma once

#include <array>
#include <cstdint>
#include <variant>
#include <vector>

#include "voleval/errors.hpp"

namespace voleval {

enum class ScalarKind : std::uint8_t { UInt8, Int16, Float32 };

inline int bytes_per_voxel(ScalarKind k) {
  switch (k) {
    case ScalarKind::UInt8: return 1;
    case ScalarKind::Int16: return 2;
    case ScalarKind::Float32: return 4;
  }
  return 0;
}

// Dense 3D scalar lattice in x-fastest order with per-axis physical
// spacing (mm). Carrier for images and binary masks; immutable once
// loaded, safe to share across threads.
struct VoxelGrid {
  std::array<int, 3> dims{0, 0, 0};
  std::array<double, 3> spacing{1.0, 1.0, 1.0};
  std::array<double, 3> origin{0.0, 0.0, 0.0};
  ScalarKind kind = ScalarKind::UInt8;
  std::variant<std::vector<std::uint8_t>, std::vector<std::int16_t>,
               std::vector<float>>
      data;

  std::size_t voxel_count() const {
    return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  }

  double voxel_volume_mm3() const {
    return spacing[0] * spacing[1] * spacing[2];
  }

  std::int64_t index_of(int x, int y, int z) const {
    return static_cast<std::int64_t>(x) +
           static_cast<std::int64_t>(dims[0]) *
               (static_cast<std::int64_t>(y) +
                static_cast<std::int64_t>(dims[1]) * z);
  }

  double value_at(std::size_t i) const {
    return std::visit(
        [i](const auto& v) { return static_cast<double>(v[i]); }, data);
  }

  // Throws FormatError when dims/spacing/data length are inconsistent.
  void validate() const;

  bool same_geometry(const VoxelGrid& other) const {
    return dims == other.dims && spacing == other.spacing;
  }
};

// A VoxelGrid whose data is UInt8 restricted to {0,1}.
struct BinaryMask {
  VoxelGrid grid;

  const std::vector<std::uint8_t>& values() const {
    return std::get<std::vector<std::uint8_t>>(grid.data);
  }
  std::vector<std::uint8_t>& values() {
    return std::get<std::vector<std::uint8_t>>(grid.data);
  }
  std::size_t foreground_count() const;
};

// Voxel maps to 1 iff value > threshold; geometry is preserved.
BinaryMask binarize(const VoxelGrid& g, double threshold);

VoxelGrid make_uint8_grid(std::array<int, 3> dims, std::array<double, 3> spacing,
                          std::array<double, 3> origin = {0.0, 0.0, 0.0});

}  // namespace voleval
