#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <stdexcept>

namespace oracle {

namespace {

bool adjacent(const std::array<int, 3>& a, const std::array<int, 3>& b,
              int connectivity) {
  const int dx = std::abs(a[0] - b[0]);
  const int dy = std::abs(a[1] - b[1]);
  const int dz = std::abs(a[2] - b[2]);
  if (dx > 1 || dy > 1 || dz > 1) return false;
  const int m = dx + dy + dz;
  if (m == 0) return false;
  if (connectivity == 6) return m == 1;
  if (connectivity == 18) return m <= 2;
  return true;
}

double sqdist(const std::array<int, 3>& a, const std::array<int, 3>& b,
              const std::array<double, 3>& spacing) {
  const double dx = (a[0] - b[0]) * spacing[0];
  const double dy = (a[1] - b[1]) * spacing[1];
  const double dz = (a[2] - b[2]) * spacing[2];
  return dx * dx + dy * dy + dz * dz;
}

double simpson(const std::function<double(double)>& f, double a, double b,
               double fa, double fm, double fb, double whole, double tol,
               int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  if (depth <= 0 || std::fabs(left + right - whole) < 15.0 * tol)
    return left + right + (left + right - whole) / 15.0;
  return simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) +
         simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1);
}

double integrate(const std::function<double(double)>& f, double a, double b,
                 double tol) {
  if (a >= b) return 0.0;
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return simpson(f, a, b, fa, fm, fb, whole, tol, 60);
}

}  // namespace

std::vector<VoxelSet> components(const voleval::BinaryMask& mask,
                                 int connectivity) {
  std::vector<std::array<int, 3>> voxels;
  const auto& dims = mask.grid.dims;
  const auto& v = mask.values();
  std::size_t i = 0;
  for (int z = 0; z < dims[2]; ++z)
    for (int y = 0; y < dims[1]; ++y)
      for (int x = 0; x < dims[0]; ++x, ++i)
        if (v[i]) voxels.push_back({x, y, z});

  // Min-label propagation to fixpoint.
  std::vector<std::size_t> label(voxels.size());
  for (std::size_t k = 0; k < voxels.size(); ++k) label[k] = k;
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t a = 0; a < voxels.size(); ++a)
      for (std::size_t b = a + 1; b < voxels.size(); ++b) {
        if (!adjacent(voxels[a], voxels[b], connectivity)) continue;
        const std::size_t m = std::min(label[a], label[b]);
        if (label[a] != m || label[b] != m) {
          label[a] = label[b] = m;
          changed = true;
        }
      }
  }

  std::map<std::size_t, VoxelSet> by_label;
  for (std::size_t k = 0; k < voxels.size(); ++k)
    by_label[label[k]].insert(voxels[k]);
  std::vector<VoxelSet> out;
  for (auto& [l, s] : by_label) out.push_back(std::move(s));
  return out;
}

VoxelSet surface_of(const VoxelSet& voxels, const std::array<int, 3>& dims) {
  VoxelSet out;
  static constexpr int off[6][3] = {{-1, 0, 0}, {1, 0, 0},  {0, -1, 0},
                                    {0, 1, 0},  {0, 0, -1}, {0, 0, 1}};
  for (const auto& c : voxels) {
    for (const auto& d : off) {
      const std::array<int, 3> n{c[0] + d[0], c[1] + d[1], c[2] + d[2]};
      const bool outside = n[0] < 0 || n[1] < 0 || n[2] < 0 ||
                           n[0] >= dims[0] || n[1] >= dims[1] ||
                           n[2] >= dims[2] || !voxels.count(n);
      if (outside) {
        out.insert(c);
        break;
      }
    }
  }
  return out;
}

double diameter_of(const VoxelSet& voxels,
                   const std::array<double, 3>& spacing) {
  double best = 0.0;
  for (auto a = voxels.begin(); a != voxels.end(); ++a) {
    auto b = a;
    for (++b; b != voxels.end(); ++b)
      best = std::max(best, sqdist(*a, *b, spacing));
  }
  return std::sqrt(best);
}

double dice_of(const VoxelSet& gt, const VoxelSet& pred_union) {
  std::size_t inter = 0;
  for (const auto& c : gt) inter += pred_union.count(c);
  return 2.0 * static_cast<double>(inter) /
         static_cast<double>(gt.size() + pred_union.size());
}

double nsd_of(const VoxelSet& gt_surface, const VoxelSet& pred_surface,
              double tau_mm, const std::array<double, 3>& spacing) {
  const double tau_sq = tau_mm * tau_mm;
  const auto count_within = [&](const VoxelSet& from, const VoxelSet& to) {
    std::size_t n = 0;
    for (const auto& p : from) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& q : to) best = std::min(best, sqdist(p, q, spacing));
      if (best <= tau_sq) ++n;
    }
    return n;
  };
  const std::size_t within = count_within(pred_surface, gt_surface) +
                             count_within(gt_surface, pred_surface);
  return static_cast<double>(within) /
         static_cast<double>(pred_surface.size() + gt_surface.size());
}

std::map<std::size_t, std::set<std::size_t>> match_of(
    const std::vector<VoxelSet>& gt, const std::vector<VoxelSet>& pred) {
  std::map<std::size_t, std::set<std::size_t>> out;
  for (std::size_t g = 0; g < gt.size(); ++g) {
    out[g];
    for (std::size_t p = 0; p < pred.size(); ++p)
      for (const auto& c : gt[g])
        if (pred[p].count(c)) {
          out[g].insert(p);
          break;
        }
  }
  return out;
}

double normal_sf(double z) {
  if (z < 0.0) return 1.0 - normal_sf(-z);
  const auto pdf = [](double t) {
    return std::exp(-0.5 * t * t) / std::sqrt(2.0 * M_PI);
  };
  return integrate(pdf, z, z + 42.0, 1e-14);
}

double chi_square_sf(double x, double dof) {
  if (x <= 0.0) return 1.0;
  const double a = dof / 2.0;
  const double log_norm = a * std::log(2.0) + std::lgamma(a);
  const auto pdf = [=](double t) {
    if (t <= 0.0) return 0.0;
    return std::exp((a - 1.0) * std::log(t) - t / 2.0 - log_norm);
  };
  // The density is negligible beyond x + 400 for the dofs under test.
  const double hi = x + 400.0 + 10.0 * dof;
  return integrate(pdf, x, hi, 1e-14);
}

double student_t_sf(double t, double dof) {
  if (t < 0.0) return 1.0 - student_t_sf(-t, dof);
  const double log_norm = std::lgamma((dof + 1.0) / 2.0) -
                          std::lgamma(dof / 2.0) -
                          0.5 * std::log(dof * M_PI);
  const auto pdf = [=](double x) {
    return std::exp(log_norm -
                    (dof + 1.0) / 2.0 * std::log1p(x * x / dof));
  };
  if (t == 0.0) return 0.5;
  // Map [t, inf) to (0, 1] with x = t/u so the heavy tail stays finite.
  const auto g = [=](double u) {
    if (u <= 0.0) return 0.0;
    const double x = t / u;
    return pdf(x) * t / (u * u);
  };
  return integrate(g, 0.0, 1.0, 1e-14);
}

std::vector<double> midranks(const std::vector<double>& v) {
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    std::size_t less = 0, equal = 0;
    for (std::size_t j = 0; j < v.size(); ++j) {
      if (v[j] < v[i]) ++less;
      if (v[j] == v[i]) ++equal;
    }
    out[i] = static_cast<double>(less) + (static_cast<double>(equal) + 1.0) / 2.0;
  }
  return out;
}

TestValue chi_square_2x2(const std::array<std::array<double, 2>, 2>& table) {
  const double r0 = table[0][0] + table[0][1];
  const double r1 = table[1][0] + table[1][1];
  const double c0 = table[0][0] + table[1][0];
  const double c1 = table[0][1] + table[1][1];
  const double n = r0 + r1;
  double stat = 0.0;
  const double rows[2] = {r0, r1};
  const double cols[2] = {c0, c1};
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      const double e = rows[i] * cols[j] / n;
      stat += (table[i][j] - e) * (table[i][j] - e) / e;
    }
  return {stat, chi_square_sf(stat, 1.0)};
}

namespace {

// Recursive enumeration of all size-n1 subsets of the pooled ranks.
void enumerate_subsets(const std::vector<double>& ranks, std::size_t start,
                       std::size_t remaining, double rank_sum,
                       double u_observed, double offset, std::uint64_t& total,
                       std::uint64_t& le, std::uint64_t& ge) {
  if (remaining == 0) {
    const double u = rank_sum - offset;
    ++total;
    if (u <= u_observed + 1e-9) ++le;
    if (u >= u_observed - 1e-9) ++ge;
    return;
  }
  if (ranks.size() - start < remaining) return;
  for (std::size_t i = start; i + remaining <= ranks.size(); ++i)
    enumerate_subsets(ranks, i + 1, remaining - 1, rank_sum + ranks[i],
                      u_observed, offset, total, le, ge);
}

}  // namespace

TestValue mann_whitney(const std::vector<double>& a,
                       const std::vector<double>& b,
                       std::size_t exact_threshold) {
  std::vector<double> pooled = a;
  pooled.insert(pooled.end(), b.begin(), b.end());
  const std::vector<double> ranks = midranks(pooled);
  const double n1 = static_cast<double>(a.size());
  const double n2 = static_cast<double>(b.size());
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) rank_sum += ranks[i];
  const double u1 = rank_sum - n1 * (n1 + 1.0) / 2.0;

  bool identical = true;
  for (double v : pooled) identical = identical && v == pooled[0];
  if (identical) return {u1, 1.0};

  if (a.size() + b.size() <= exact_threshold) {
    std::uint64_t total = 0, le = 0, ge = 0;
    enumerate_subsets(ranks, 0, a.size(), 0.0, u1, n1 * (n1 + 1.0) / 2.0,
                      total, le, ge);
    const double p = 2.0 * std::min(static_cast<double>(le),
                                    static_cast<double>(ge)) /
                     static_cast<double>(total);
    return {u1, std::min(1.0, p)};
  }

  const double n = n1 + n2;
  std::sort(pooled.begin(), pooled.end());
  double tie_sum = 0.0;
  std::size_t i = 0;
  while (i < pooled.size()) {
    std::size_t j = i;
    while (j < pooled.size() && pooled[j] == pooled[i]) ++j;
    const double t = static_cast<double>(j - i);
    tie_sum += t * t * t - t;
    i = j;
  }
  const double mu = n1 * n2 / 2.0;
  const double var =
      n1 * n2 / 12.0 * ((n + 1.0) - tie_sum / (n * (n - 1.0)));
  const double diff = u1 - mu;
  const double cc = diff > 0.0 ? 0.5 : (diff < 0.0 ? -0.5 : 0.0);
  const double z = (diff - cc) / std::sqrt(var);
  return {u1, std::min(1.0, 2.0 * normal_sf(std::fabs(z)))};
}

TestValue kruskal_wallis(const std::vector<std::vector<double>>& groups) {
  std::vector<double> pooled;
  for (const auto& g : groups) pooled.insert(pooled.end(), g.begin(), g.end());
  const std::vector<double> ranks = midranks(pooled);
  const double n = static_cast<double>(pooled.size());
  double h = 0.0;
  std::size_t offset = 0;
  for (const auto& g : groups) {
    double rs = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) rs += ranks[offset + i];
    h += rs * rs / static_cast<double>(g.size());
    offset += g.size();
  }
  h = 12.0 / (n * (n + 1.0)) * h - 3.0 * (n + 1.0);

  std::sort(pooled.begin(), pooled.end());
  double tie_sum = 0.0;
  std::size_t i = 0;
  while (i < pooled.size()) {
    std::size_t j = i;
    while (j < pooled.size() && pooled[j] == pooled[i]) ++j;
    const double t = static_cast<double>(j - i);
    tie_sum += t * t * t - t;
    i = j;
  }
  h /= 1.0 - tie_sum / (n * n * n - n);
  return {h, chi_square_sf(h, static_cast<double>(groups.size() - 1))};
}

TestValue spearman(const std::vector<double>& x, const std::vector<double>& y) {
  const std::vector<double> rx = midranks(x);
  const std::vector<double> ry = midranks(y);
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  const double rho = sxy / std::sqrt(sxx * syy);
  if (std::fabs(rho) >= 1.0) return {rho, 0.0};
  const double t = rho * std::sqrt((n - 2.0) / (1.0 - rho * rho));
  return {rho, std::min(1.0, 2.0 * student_t_sf(std::fabs(t), n - 2.0))};
}

std::pair<double, double> bootstrap_mean_ci(const std::vector<double>& data,
                                            std::size_t n_resamples,
                                            double confidence,
                                            std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, data.size() - 1);
  std::vector<double> means;
  means.reserve(n_resamples);
  for (std::size_t r = 0; r < n_resamples; ++r) {
    double sum = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) sum += data[pick(rng)];
    means.push_back(sum / static_cast<double>(data.size()));
  }
  std::sort(means.begin(), means.end());
  const auto quant = [&](double q) {
    const double pos = q * static_cast<double>(means.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    if (lo + 1 >= means.size()) return means.back();
    return means[lo] + (pos - lo) * (means[lo + 1] - means[lo]);
  };
  const double alpha = 1.0 - confidence;
  return {quant(alpha / 2.0), quant(1.0 - alpha / 2.0)};
}

}  // namespace oracle
