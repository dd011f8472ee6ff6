#include "voleval/distance.hpp"

#include <algorithm>
#include <limits>

namespace voleval {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// 1D squared-distance transform over samples at positions i*s.
// f holds squared distances accumulated from earlier passes (kInf where
// no site reaches); d receives min_v f[v] + ((q-v)*s)^2.
void dt1d(const double* f, double* d, int n, double s,
          std::vector<int>& v, std::vector<double>& z) {
  v.clear();
  z.clear();
  const double s2 = s * s;
  for (int q = 0; q < n; ++q) {
    if (f[q] == kInf) continue;
    while (!v.empty()) {
      const int p = v.back();
      // Intersection of parabolas rooted at p and q, in sample units.
      const double x =
          ((f[q] - f[p]) / s2 + static_cast<double>(q) * q -
           static_cast<double>(p) * p) /
          (2.0 * (q - p));
      if (x <= z.back()) {
        v.pop_back();
        z.pop_back();
      } else {
        break;
      }
    }
    if (v.empty()) {
      v.push_back(q);
      z.push_back(-kInf);
    } else {
      const int p = v.back();
      const double x =
          ((f[q] - f[p]) / s2 + static_cast<double>(q) * q -
           static_cast<double>(p) * p) /
          (2.0 * (q - p));
      v.push_back(q);
      z.push_back(x);
    }
  }
  if (v.empty()) {
    std::fill(d, d + n, kInf);
    return;
  }
  std::size_t k = 0;
  for (int q = 0; q < n; ++q) {
    while (k + 1 < z.size() && z[k + 1] < static_cast<double>(q)) ++k;
    const double dq = (static_cast<double>(q) - v[k]) * s;
    d[q] = dq * dq + f[v[k]];
  }
}

}  // namespace

std::vector<double> nearest_site_sqdist(std::span<const Coord> sites,
                                        std::span<const Coord> queries,
                                        const std::array<double, 3>& spacing) {
  std::vector<double> out(queries.size(), kInf);
  if (sites.empty() || queries.empty()) return out;

  int lo[3] = {sites[0].x, sites[0].y, sites[0].z};
  int hi[3] = {sites[0].x, sites[0].y, sites[0].z};
  const auto expand = [&](const Coord& c) {
    lo[0] = std::min(lo[0], static_cast<int>(c.x));
    lo[1] = std::min(lo[1], static_cast<int>(c.y));
    lo[2] = std::min(lo[2], static_cast<int>(c.z));
    hi[0] = std::max(hi[0], static_cast<int>(c.x));
    hi[1] = std::max(hi[1], static_cast<int>(c.y));
    hi[2] = std::max(hi[2], static_cast<int>(c.z));
  };
  for (const Coord& c : sites) expand(c);
  for (const Coord& c : queries) expand(c);

  const int bx = hi[0] - lo[0] + 1;
  const int by = hi[1] - lo[1] + 1;
  const int bz = hi[2] - lo[2] + 1;
  const std::size_t nbox = static_cast<std::size_t>(bx) * by * bz;
  const auto at = [&](int x, int y, int z) {
    return static_cast<std::size_t>(x - lo[0]) +
           static_cast<std::size_t>(bx) *
               (static_cast<std::size_t>(y - lo[1]) +
                static_cast<std::size_t>(by) * (z - lo[2]));
  };

  std::vector<double> field(nbox, kInf);
  for (const Coord& c : sites) field[at(c.x, c.y, c.z)] = 0.0;

  std::vector<int> v;
  std::vector<double> z;
  std::vector<double> row(std::max({bx, by, bz}));
  std::vector<double> drow(row.size());

  // Pass along x.
  for (int zz = 0; zz < bz; ++zz)
    for (int yy = 0; yy < by; ++yy) {
      double* base = field.data() + at(lo[0], yy + lo[1], zz + lo[2]);
      dt1d(base, drow.data(), bx, spacing[0], v, z);
      std::copy(drow.begin(), drow.begin() + bx, base);
    }

  // Pass along y.
  for (int zz = 0; zz < bz; ++zz)
    for (int xx = 0; xx < bx; ++xx) {
      for (int yy = 0; yy < by; ++yy)
        row[yy] = field[at(xx + lo[0], yy + lo[1], zz + lo[2])];
      dt1d(row.data(), drow.data(), by, spacing[1], v, z);
      for (int yy = 0; yy < by; ++yy)
        field[at(xx + lo[0], yy + lo[1], zz + lo[2])] = drow[yy];
    }

  // Pass along z.
  for (int yy = 0; yy < by; ++yy)
    for (int xx = 0; xx < bx; ++xx) {
      for (int zz = 0; zz < bz; ++zz)
        row[zz] = field[at(xx + lo[0], yy + lo[1], zz + lo[2])];
      dt1d(row.data(), drow.data(), bz, spacing[2], v, z);
      for (int zz = 0; zz < bz; ++zz)
        field[at(xx + lo[0], yy + lo[1], zz + lo[2])] = drow[zz];
    }

  for (std::size_t i = 0; i < queries.size(); ++i)
    out[i] = field[at(queries[i].x, queries[i].y, queries[i].z)];
  return out;
}

}  // namespace voleval
