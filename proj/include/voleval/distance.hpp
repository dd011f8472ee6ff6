#pragma once

#include <array>
#include <span>
#include <vector>

#include "voleval/lesions.hpp"

namespace voleval {

// Exact anisotropic squared Euclidean distance transform
// (Felzenszwalb-Huttenlocher lower-envelope method, one pass per axis).
// Returns, for every query voxel, the squared distance in mm² from its
// center to the nearest site voxel center. Computed over the bounding
// box of sites and queries, so cost is proportional to that box.
std::vector<double> nearest_site_sqdist(std::span<const Coord> sites,
                                        std::span<const Coord> queries,
                                        const std::array<double, 3>& spacing);

}  // namespace voleval
