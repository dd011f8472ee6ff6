#include "voleval/stats.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

namespace voleval::stats {

namespace {

// Regularized upper incomplete gamma Q(a, x), series for x < a+1 and
// Lentz continued fraction otherwise (Numerical Recipes style).
double gamma_q(double a, double x) {
  if (x < 0.0 || a <= 0.0) return 1.0;
  if (x == 0.0) return 1.0;
  const double lg = std::lgamma(a);
  if (x < a + 1.0) {
    double ap = a;
    double sum = 1.0 / a;
    double del = sum;
    for (int i = 0; i < 500; ++i) {
      ap += 1.0;
      del *= x / ap;
      sum += del;
      if (std::fabs(del) < std::fabs(sum) * 1e-16) break;
    }
    const double p = sum * std::exp(-x + a * std::log(x) - lg);
    return 1.0 - p;
  }
  double b = x + 1.0 - a;
  double c = 1e308;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= 500; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < 1e-300) d = 1e-300;
    c = b + an / c;
    if (std::fabs(c) < 1e-300) c = 1e-300;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < 1e-16) break;
  }
  return std::exp(-x + a * std::log(x) - lg) * h;
}

// Continued fraction for the regularized incomplete beta (Lentz).
double betacf(double a, double b, double x) {
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < 1e-300) d = 1e-300;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 500; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < 1e-300) d = 1e-300;
    c = 1.0 + aa / c;
    if (std::fabs(c) < 1e-300) c = 1e-300;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < 1e-300) d = 1e-300;
    c = 1.0 + aa / c;
    if (std::fabs(c) < 1e-300) c = 1e-300;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < 1e-16) break;
  }
  return h;
}

double beta_inc(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_bt = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                       a * std::log(x) + b * std::log(1.0 - x);
  const double bt = std::exp(ln_bt);
  if (x < (a + 1.0) / (a + b + 2.0))
    return bt * betacf(a, b, x) / a;
  return 1.0 - bt * betacf(b, a, 1.0 - x) / b;
}

double clamp01(double p) { return std::min(1.0, std::max(0.0, p)); }

// Sum of t^3 - t over tie groups of a sorted value vector.
double tie_correction_sum(std::vector<double> pooled) {
  std::sort(pooled.begin(), pooled.end());
  double sum = 0.0;
  std::size_t i = 0;
  while (i < pooled.size()) {
    std::size_t j = i;
    while (j < pooled.size() && pooled[j] == pooled[i]) ++j;
    const double t = static_cast<double>(j - i);
    sum += t * t * t - t;
    i = j;
  }
  return sum;
}

bool all_equal(std::span<const double> v) {
  return std::adjacent_find(v.begin(), v.end(),
                            std::not_equal_to<double>()) == v.end();
}

// Exact two-sided Mann-Whitney p by enumerating every assignment of n1
// of the pooled midranks to the first sample (permutation distribution,
// so ties are handled for free).
double mw_exact_two_sided(const std::vector<double>& ranks, std::size_t n1,
                          double u_observed) {
  const std::size_t n = ranks.size();
  std::vector<std::size_t> idx(n1);
  std::iota(idx.begin(), idx.end(), 0);
  const double offset = static_cast<double>(n1) * (n1 + 1) / 2.0;
  std::uint64_t total = 0, count_le = 0, count_ge = 0;
  const double eps = 1e-9;
  while (true) {
    double rank_sum = 0.0;
    for (std::size_t k : idx) rank_sum += ranks[k];
    const double u = rank_sum - offset;
    ++total;
    if (u <= u_observed + eps) ++count_le;
    if (u >= u_observed - eps) ++count_ge;

    // Next combination in lexicographic order.
    std::size_t i = n1;
    while (i > 0 && idx[i - 1] == n - n1 + i - 1) --i;
    if (i == 0) break;
    ++idx[i - 1];
    for (std::size_t j = i; j < n1; ++j) idx[j] = idx[j - 1] + 1;
  }
  const double p_le = static_cast<double>(count_le) / static_cast<double>(total);
  const double p_ge = static_cast<double>(count_ge) / static_cast<double>(total);
  return clamp01(2.0 * std::min(p_le, p_ge));
}

}  // namespace

double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

double chi_square_sf(double x, double dof) {
  if (x <= 0.0) return 1.0;
  return clamp01(gamma_q(dof / 2.0, x / 2.0));
}

double student_t_sf(double t, double dof) {
  // One-sided upper tail.
  const double x = dof / (dof + t * t);
  const double half = 0.5 * beta_inc(dof / 2.0, 0.5, x);
  return t >= 0.0 ? half : 1.0 - half;
}

std::vector<double> midranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return values[a] < values[b];
  });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && values[order[j]] == values[order[i]]) ++j;
    const double avg = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = avg;
    i = j;
  }
  return ranks;
}

TestResult chi_square_2x2(const std::array<std::array<double, 2>, 2>& table,
                          bool yates) {
  std::vector<std::vector<double>> t = {{table[0][0], table[0][1]},
                                        {table[1][0], table[1][1]}};
  if (!yates) return chi_square_contingency(t);

  const double r0 = t[0][0] + t[0][1], r1 = t[1][0] + t[1][1];
  const double c0 = t[0][0] + t[1][0], c1 = t[0][1] + t[1][1];
  if (r0 <= 0.0 || r1 <= 0.0 || c0 <= 0.0 || c1 <= 0.0)
    throw DegenerateStatisticsError("chi-square table has a zero margin");
  const double total = r0 + r1;
  double stat = 0.0;
  const double rows[2] = {r0, r1};
  const double cols[2] = {c0, c1};
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      const double e = rows[i] * cols[j] / total;
      const double d = std::max(0.0, std::fabs(t[i][j] - e) - 0.5);
      stat += d * d / e;
    }
  TestResult r;
  r.statistic = stat;
  r.p_value = chi_square_sf(stat, 1.0);
  r.method = "chi_square_yates";
  r.n = {static_cast<std::size_t>(total)};
  return r;
}

TestResult chi_square_contingency(
    const std::vector<std::vector<double>>& table) {
  const std::size_t nr = table.size();
  const std::size_t nc = nr ? table[0].size() : 0;
  if (nr < 2 || nc < 2)
    throw DegenerateStatisticsError("contingency table needs >= 2 rows/cols");
  std::vector<double> rows(nr, 0.0), cols(nc, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < nr; ++i)
    for (std::size_t j = 0; j < nc; ++j) {
      if (table[i][j] < 0.0)
        throw DegenerateStatisticsError("negative cell count");
      rows[i] += table[i][j];
      cols[j] += table[i][j];
      total += table[i][j];
    }
  for (double m : rows)
    if (m <= 0.0)
      throw DegenerateStatisticsError("chi-square table has a zero margin");
  for (double m : cols)
    if (m <= 0.0)
      throw DegenerateStatisticsError("chi-square table has a zero margin");

  double stat = 0.0;
  for (std::size_t i = 0; i < nr; ++i)
    for (std::size_t j = 0; j < nc; ++j) {
      const double e = rows[i] * cols[j] / total;
      const double d = table[i][j] - e;
      stat += d * d / e;
    }
  TestResult r;
  r.statistic = stat;
  r.p_value = chi_square_sf(stat, static_cast<double>((nr - 1) * (nc - 1)));
  r.method = "chi_square";
  r.n = {static_cast<std::size_t>(total)};
  return r;
}

TestResult mann_whitney_u(std::span<const double> a, std::span<const double> b,
                          std::size_t exact_threshold) {
  const std::size_t n1 = a.size(), n2 = b.size();
  if (n1 == 0 || n2 == 0)
    throw InsufficientDataError("mann_whitney_u needs nonempty samples");

  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  const std::vector<double> ranks = midranks(pooled);
  double rank_sum_a = 0.0;
  for (std::size_t i = 0; i < n1; ++i) rank_sum_a += ranks[i];
  const double u1 = rank_sum_a - static_cast<double>(n1) * (n1 + 1) / 2.0;

  TestResult r;
  r.statistic = u1;
  r.method = "mann_whitney_u";
  r.n = {n1, n2};

  if (all_equal(pooled)) {
    r.degenerate = true;
    r.p_value = 1.0;
    return r;
  }

  if (n1 + n2 <= exact_threshold) {
    r.p_value = mw_exact_two_sided(ranks, n1, u1);
    r.method = "mann_whitney_u_exact";
    return r;
  }

  const double n = static_cast<double>(n1 + n2);
  const double mu = static_cast<double>(n1) * n2 / 2.0;
  const double tie_sum = tie_correction_sum(pooled);
  const double var = static_cast<double>(n1) * n2 / 12.0 *
                     ((n + 1.0) - tie_sum / (n * (n - 1.0)));
  if (var <= 0.0) {
    r.degenerate = true;
    r.p_value = 1.0;
    return r;
  }
  const double diff = u1 - mu;
  const double cc = diff > 0.0 ? 0.5 : (diff < 0.0 ? -0.5 : 0.0);
  const double z = (diff - cc) / std::sqrt(var);
  r.p_value = clamp01(2.0 * normal_sf(std::fabs(z)));
  return r;
}

TestResult kruskal_wallis(const std::vector<std::vector<double>>& groups) {
  if (groups.size() < 2)
    throw InsufficientDataError("kruskal_wallis needs >= 2 groups");
  std::vector<double> pooled;
  for (const auto& g : groups) {
    if (g.empty())
      throw InsufficientDataError("kruskal_wallis groups must be nonempty");
    pooled.insert(pooled.end(), g.begin(), g.end());
  }

  TestResult r;
  r.method = "kruskal_wallis";
  for (const auto& g : groups) r.n.push_back(g.size());

  if (all_equal(pooled)) {
    r.degenerate = true;
    r.statistic = 0.0;
    r.p_value = 1.0;
    return r;
  }

  const std::vector<double> ranks = midranks(pooled);
  const double n = static_cast<double>(pooled.size());
  double h = 0.0;
  std::size_t offset = 0;
  for (const auto& g : groups) {
    double rank_sum = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) rank_sum += ranks[offset + i];
    h += rank_sum * rank_sum / static_cast<double>(g.size());
    offset += g.size();
  }
  h = 12.0 / (n * (n + 1.0)) * h - 3.0 * (n + 1.0);
  const double correction = 1.0 - tie_correction_sum(pooled) / (n * n * n - n);
  h /= correction;

  r.statistic = h;
  r.p_value = chi_square_sf(h, static_cast<double>(groups.size() - 1));
  return r;
}

TestResult spearman_rho(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 3)
    throw InsufficientDataError("spearman_rho needs >= 3 paired samples");
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
    const double dx = rx[i] - mx;
    const double dy = ry[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0)
    throw DegenerateStatisticsError(
        "spearman_rho undefined: zero rank variance");

  const double rho = sxy / std::sqrt(sxx * syy);
  TestResult r;
  r.statistic = rho;
  r.method = "spearman_rho";
  r.n = {x.size()};
  const double clamped = std::min(1.0, std::max(-1.0, rho));
  if (std::fabs(clamped) >= 1.0) {
    r.p_value = 0.0;
  } else {
    const double dof = n - 2.0;
    const double t = clamped * std::sqrt(dof / (1.0 - clamped * clamped));
    r.p_value = clamp01(2.0 * student_t_sf(std::fabs(t), dof));
  }
  return r;
}

}  // namespace voleval::stats
