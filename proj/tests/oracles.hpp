#pragma once

// Independent brute-force / quadrature reference implementations used to
// verify the production code. Everything here is deliberately written
// against different algorithms than the library: components by
// min-label propagation to a fixpoint, surface distances by exhaustive
// all-pairs search, distribution tails by adaptive quadrature, ranks by
// pairwise counting.

#include <array>
#include <cstdint>
#include <map>
#include <set>
#include <vector>

#include "voleval/voxel_grid.hpp"

namespace oracle {

using VoxelSet = std::set<std::array<int, 3>>;

// Connected components by iterated min-label propagation.
std::vector<VoxelSet> components(const voleval::BinaryMask& mask,
                                 int connectivity);

VoxelSet surface_of(const VoxelSet& voxels, const std::array<int, 3>& dims);

// All-pairs diameter over every voxel (not only the surface).
double diameter_of(const VoxelSet& voxels,
                   const std::array<double, 3>& spacing);

double dice_of(const VoxelSet& gt, const VoxelSet& pred_union);

// Symmetric NSD with exhaustive nearest-neighbor search; compares
// squared distances against tau^2 exactly like the production code.
double nsd_of(const VoxelSet& gt_surface, const VoxelSet& pred_surface,
              double tau_mm, const std::array<double, 3>& spacing);

// gt index -> set of overlapping pred indices, by raw set intersection.
std::map<std::size_t, std::set<std::size_t>> match_of(
    const std::vector<VoxelSet>& gt, const std::vector<VoxelSet>& pred);

// Distribution tails by adaptive Simpson quadrature of the densities.
double normal_sf(double z);
double chi_square_sf(double x, double dof);
double student_t_sf(double t, double dof);

// Midranks by pairwise counting.
std::vector<double> midranks(const std::vector<double>& v);

struct TestValue {
  double statistic = 0.0;
  double p_value = 1.0;
};

TestValue chi_square_2x2(const std::array<std::array<double, 2>, 2>& table);
TestValue mann_whitney(const std::vector<double>& a,
                       const std::vector<double>& b,
                       std::size_t exact_threshold);
TestValue kruskal_wallis(const std::vector<std::vector<double>>& groups);
TestValue spearman(const std::vector<double>& x, const std::vector<double>& y);

// Percentile bootstrap of the sample mean with an mt19937_64 resampler;
// used for the coverage cross-check.
std::pair<double, double> bootstrap_mean_ci(const std::vector<double>& data,
                                            std::size_t n_resamples,
                                            double confidence,
                                            std::uint64_t seed);

}  // namespace oracle
