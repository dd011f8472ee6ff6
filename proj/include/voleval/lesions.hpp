#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "voleval/voxel_grid.hpp"

namespace voleval {

struct Coord {
  std::int16_t x = 0, y = 0, z = 0;
  friend bool operator==(const Coord&, const Coord&) = default;
};

enum class Connectivity : int { Six = 6, Eighteen = 18, TwentySix = 26 };

// One connected component of a binary mask. Voxels and surface are kept
// in ascending linear-index (x-fastest) order.
struct Lesion {
  int id = 0;
  std::vector<Coord> voxels;
  std::vector<Coord> surface;  // voxels with a 6-neighbor outside the lesion
  double volume_mm3 = 0.0;
  double max_diameter_mm = 0.0;
};

struct LesionSet {
  std::array<int, 3> dims{0, 0, 0};
  std::array<double, 3> spacing{1.0, 1.0, 1.0};
  std::vector<Lesion> lesions;
};

// Decomposes a mask into maximal connected components of 1-voxels.
// Labels are assigned in deterministic scan order: lesion ids ascend
// with the linear index (x fastest, then y, then z) of each lesion's
// first voxel. Volume, surface and maximal diameter are filled in.
LesionSet connected_components(const BinaryMask& mask,
                               Connectivity connectivity = Connectivity::TwentySix);

double lesion_volume(std::size_t voxel_count,
                     const std::array<double, 3>& spacing);

// Maximum Euclidean distance in mm between voxel centers, evaluated over
// the surface voxels (extreme points of a finite set lie on its surface,
// so the restriction is exact). A single voxel has diameter 0.
double lesion_max_diameter(std::span<const Coord> surface,
                           const std::array<double, 3>& spacing);

// Boundary voxels: at least one 6-neighbor is outside the voxel set;
// the grid boundary counts as outside. Input must be sorted by linear
// index; output preserves that order.
std::vector<Coord> extract_surface(std::span<const Coord> voxels,
                                   const std::array<int, 3>& dims);

}  // namespace voleval
