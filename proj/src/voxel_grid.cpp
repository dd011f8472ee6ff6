#include "voleval/voxel_grid.hpp"

#include <cmath>
#include <numeric>

namespace voleval {

void VoxelGrid::validate() const {
  for (int a = 0; a < 3; ++a) {
    if (dims[a] <= 0)
      throw FormatError("grid dimension must be positive");
    if (!(spacing[a] > 0.0) || !std::isfinite(spacing[a]))
      throw FormatError("grid spacing must be positive and finite");
  }
  const std::size_t n = voxel_count();
  const std::size_t len =
      std::visit([](const auto& v) { return v.size(); }, data);
  if (len != n)
    throw FormatError("data length does not match grid dimensions");
}

std::size_t BinaryMask::foreground_count() const {
  const auto& v = values();
  return static_cast<std::size_t>(std::accumulate(
      v.begin(), v.end(), std::uint64_t{0},
      [](std::uint64_t acc, std::uint8_t x) { return acc + (x != 0); }));
}

BinaryMask binarize(const VoxelGrid& g, double threshold) {
  g.validate();
  BinaryMask mask;
  mask.grid.dims = g.dims;
  mask.grid.spacing = g.spacing;
  mask.grid.origin = g.origin;
  mask.grid.kind = ScalarKind::UInt8;
  std::vector<std::uint8_t> out(g.voxel_count());
  std::visit(
      [&](const auto& v) {
        for (std::size_t i = 0; i < v.size(); ++i)
          out[i] = static_cast<double>(v[i]) > threshold ? 1 : 0;
      },
      g.data);
  mask.grid.data = std::move(out);
  return mask;
}

VoxelGrid make_uint8_grid(std::array<int, 3> dims, std::array<double, 3> spacing,
                          std::array<double, 3> origin) {
  VoxelGrid g;
  g.dims = dims;
  g.spacing = spacing;
  g.origin = origin;
  g.kind = ScalarKind::UInt8;
  g.data = std::vector<std::uint8_t>(g.voxel_count(), 0);
  g.validate();
  return g;
}

}  // namespace voleval
