#include "etrace/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace etrace::stats {

double mean(std::span<const double> xs) {
  if (xs.empty()) throw std::invalid_argument("mean: empty sample");
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double quantile(std::span<const double> xs, double q) {
  if (xs.empty()) throw std::invalid_argument("quantile: empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("quantile: q outside [0, 1]");
  std::vector<double> s(xs.begin(), xs.end());
  std::sort(s.begin(), s.end());
  const double h = q * static_cast<double>(s.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, s.size() - 1);
  const double frac = h - static_cast<double>(lo);
  if (frac == 0.0) return s[lo];
  return s[lo] + frac * (s[hi] - s[lo]);
}

double median(std::span<const double> xs) { return quantile(xs, 0.5); }

namespace {

// Number of rank arrangements with a given U, for samples of size m and n.
// counts[m][n][u] via the standard recursion f(m,n,u) = f(m-1,n,u-n) + f(m,n-1,u).
double exact_upper_tail(std::size_t m, std::size_t n, double u_obs) {
  const std::size_t max_u = m * n;
  std::vector<std::vector<std::vector<double>>> f(
      m + 1, std::vector<std::vector<double>>(n + 1, std::vector<double>(max_u + 1, 0.0)));
  for (std::size_t i = 0; i <= m; ++i) {
    for (std::size_t j = 0; j <= n; ++j) {
      if (i == 0 || j == 0) {
        f[i][j][0] = 1.0;
        continue;
      }
      for (std::size_t u = 0; u <= i * j; ++u) {
        double v = f[i][j - 1][u];
        if (u >= j) v += f[i - 1][j][u - j];
        f[i][j][u] = v;
      }
    }
  }
  double total = 0.0;
  double tail = 0.0;
  for (std::size_t u = 0; u <= max_u; ++u) {
    total += f[m][n][u];
    if (static_cast<double>(u) >= u_obs - 1e-9) tail += f[m][n][u];
  }
  return tail / total;
}

}  // namespace

MannWhitney mann_whitney_greater(std::span<const double> first, std::span<const double> second) {
  if (first.empty() || second.empty()) throw std::invalid_argument("mann_whitney: empty sample");
  const std::size_t m = first.size();
  const std::size_t n = second.size();

  struct Item {
    double v;
    bool from_first;
  };
  std::vector<Item> all;
  for (double x : first) all.push_back({x, true});
  for (double x : second) all.push_back({x, false});
  std::sort(all.begin(), all.end(), [](const Item& a, const Item& b) { return a.v < b.v; });

  double rank_sum = 0.0;
  double tie_term = 0.0;
  bool ties = false;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    while (j < all.size() && all[j].v == all[i].v) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    const double t = static_cast<double>(j - i);
    if (t > 1) {
      ties = true;
      tie_term += t * t * t - t;
    }
    for (std::size_t k = i; k < j; ++k) {
      if (all[k].from_first) rank_sum += avg_rank;
    }
    i = j;
  }

  MannWhitney out;
  const double dm = static_cast<double>(m);
  const double dn = static_cast<double>(n);
  out.u = rank_sum - dm * (dm + 1.0) / 2.0;

  if (!ties && m <= 30 && n <= 30) {
    out.exact = true;
    out.p_value = exact_upper_tail(m, n, out.u);
    return out;
  }
  const double total = dm + dn;
  const double mu = dm * dn / 2.0;
  const double var = dm * dn / 12.0 * ((total + 1.0) - tie_term / (total * (total - 1.0)));
  if (var <= 0.0) {
    out.p_value = 1.0;
    return out;
  }
  const double z = (out.u - mu - 0.5) / std::sqrt(var);
  out.p_value = 0.5 * std::erfc(z / std::sqrt(2.0));
  return out;
}

}  // namespace etrace::stats
