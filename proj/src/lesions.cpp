#include "voleval/lesions.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace voleval {

namespace {

// Scan-order-prior neighbor offsets (negative linear offset) for the
// two-pass union-find labeling, per connectivity.
std::vector<std::array<int, 3>> prior_neighbors(Connectivity c) {
  std::vector<std::array<int, 3>> out;
  for (int dz = -1; dz <= 0; ++dz)
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        if (dz == 0 && (dy > 0 || (dy == 0 && dx >= 0))) continue;
        const int manhattan = std::abs(dx) + std::abs(dy) + std::abs(dz);
        if (c == Connectivity::Six && manhattan != 1) continue;
        if (c == Connectivity::Eighteen && manhattan > 2) continue;
        out.push_back({dx, dy, dz});
      }
  return out;
}

struct UnionFind {
  std::vector<std::int32_t> parent;

  std::int32_t make() {
    parent.push_back(static_cast<std::int32_t>(parent.size()));
    return parent.back();
  }
  std::int32_t find(std::int32_t a) {
    while (parent[a] != a) {
      parent[a] = parent[parent[a]];  // path halving
      a = parent[a];
    }
    return a;
  }
  void unite(std::int32_t a, std::int32_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (a < b) parent[b] = a; else parent[a] = b;
  }
};

}  // namespace

double lesion_volume(std::size_t voxel_count,
                     const std::array<double, 3>& spacing) {
  return static_cast<double>(voxel_count) * spacing[0] * spacing[1] *
         spacing[2];
}

double lesion_max_diameter(std::span<const Coord> surface,
                           const std::array<double, 3>& spacing) {
  double best_sq = 0.0;
  for (std::size_t i = 0; i < surface.size(); ++i) {
    for (std::size_t j = i + 1; j < surface.size(); ++j) {
      const double dx = (surface[i].x - surface[j].x) * spacing[0];
      const double dy = (surface[i].y - surface[j].y) * spacing[1];
      const double dz = (surface[i].z - surface[j].z) * spacing[2];
      const double sq = dx * dx + dy * dy + dz * dz;
      if (sq > best_sq) best_sq = sq;
    }
  }
  return std::sqrt(best_sq);
}

std::vector<Coord> extract_surface(std::span<const Coord> voxels,
                                   const std::array<int, 3>& dims) {
  std::unordered_set<std::int64_t> inside;
  inside.reserve(voxels.size() * 2);
  const auto index = [&](int x, int y, int z) {
    return static_cast<std::int64_t>(x) +
           static_cast<std::int64_t>(dims[0]) *
               (static_cast<std::int64_t>(y) +
                static_cast<std::int64_t>(dims[1]) * z);
  };
  for (const Coord& c : voxels) inside.insert(index(c.x, c.y, c.z));

  static constexpr int off[6][3] = {{-1, 0, 0}, {1, 0, 0},  {0, -1, 0},
                                    {0, 1, 0},  {0, 0, -1}, {0, 0, 1}};
  std::vector<Coord> surface;
  for (const Coord& c : voxels) {
    for (const auto& d : off) {
      const int nx = c.x + d[0], ny = c.y + d[1], nz = c.z + d[2];
      const bool outside = nx < 0 || ny < 0 || nz < 0 || nx >= dims[0] ||
                           ny >= dims[1] || nz >= dims[2] ||
                           !inside.count(index(nx, ny, nz));
      if (outside) {
        surface.push_back(c);
        break;
      }
    }
  }
  return surface;
}

LesionSet connected_components(const BinaryMask& mask, Connectivity connectivity) {
  mask.grid.validate();
  const auto& dims = mask.grid.dims;
  const auto& vox = mask.values();
  const std::int64_t nx = dims[0], ny = dims[1], nz = dims[2];

  LesionSet set;
  set.dims = dims;
  set.spacing = mask.grid.spacing;

  const auto neighbors = prior_neighbors(connectivity);
  std::vector<std::int32_t> label(vox.size(), -1);
  UnionFind uf;

  // First pass: provisional labels, merging across prior neighbors.
  std::int64_t i = 0;
  for (int z = 0; z < nz; ++z) {
    for (int y = 0; y < ny; ++y) {
      for (int x = 0; x < nx; ++x, ++i) {
        if (!vox[i]) continue;
        std::int32_t cur = -1;
        for (const auto& d : neighbors) {
          const int px = x + d[0], py = y + d[1], pz = z + d[2];
          if (px < 0 || py < 0 || pz < 0 || px >= nx || py >= ny) continue;
          const std::int64_t pi = px + nx * (py + ny * pz);
          const std::int32_t pl = label[pi];
          if (pl < 0) continue;
          if (cur < 0) cur = pl; else uf.unite(cur, pl);
        }
        if (cur < 0) cur = uf.make();
        label[i] = cur;
      }
    }
  }

  // Second pass: final ids in order of first appearance, which is the
  // ascending linear index of each component's first voxel.
  std::vector<std::int32_t> final_id(uf.parent.size(), -1);
  std::int32_t next_id = 0;
  i = 0;
  for (int z = 0; z < nz; ++z) {
    for (int y = 0; y < ny; ++y) {
      for (int x = 0; x < nx; ++x, ++i) {
        if (label[i] < 0) continue;
        const std::int32_t root = uf.find(label[i]);
        if (final_id[root] < 0) {
          final_id[root] = next_id++;
          set.lesions.emplace_back();
          set.lesions.back().id = next_id;  // 1-based ids
        }
        set.lesions[final_id[root]].voxels.push_back(
            {static_cast<std::int16_t>(x), static_cast<std::int16_t>(y),
             static_cast<std::int16_t>(z)});
      }
    }
  }

  for (Lesion& lesion : set.lesions) {
    lesion.volume_mm3 = lesion_volume(lesion.voxels.size(), set.spacing);
    lesion.surface = extract_surface(lesion.voxels, dims);
    lesion.max_diameter_mm = lesion_max_diameter(lesion.surface, set.spacing);
  }
  return set;
}

}  // namespace voleval
