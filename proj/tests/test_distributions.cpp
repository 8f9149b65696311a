#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "etrace/distributions.hpp"
#include "oracles.hpp"

using namespace etrace;
using namespace etrace::dist;

namespace {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

Policy random_policy(std::mt19937_64& rng, bool student) {
  std::uniform_int_distribution<std::size_t> dims(1, 3);
  std::uniform_real_distribution<double> scale(0.2, 2.0);
  std::uniform_real_distribution<double> dof(2.2, 30.0);
  const std::size_t d = dims(rng);
  auto mean = oracle::random_vector(d, rng);
  std::vector<double> sc(d);
  for (double& s : sc) s = scale(rng);
  if (student) return DiagStudentT{mean, sc, dof(rng)};
  return DiagNormal{mean, sc};
}

// log-density as a function of the packed (mean, scale[, dof]) vector
double packed_log_density(const Policy& shape, const std::vector<double>& x,
                          std::span<const double> action) {
  const std::size_t d = dim(shape);
  std::vector<double> mean(x.begin(), x.begin() + static_cast<long>(d));
  std::vector<double> scale(x.begin() + static_cast<long>(d), x.begin() + static_cast<long>(2 * d));
  if (std::holds_alternative<DiagStudentT>(shape)) {
    return log_density(DiagStudentT{mean, scale, x[2 * d]}, action);
  }
  return log_density(DiagNormal{mean, scale}, action);
}

}  // namespace

TEST_SUITE("distributions") {

TEST_CASE("special functions against tabulated values") {
  CHECK(log_gamma(0.5) == doctest::Approx(0.5723649429247001).epsilon(1e-13));
  CHECK(log_gamma(10.0) == doctest::Approx(12.801827480081469).epsilon(1e-13));
  CHECK(log_gamma(1.0) == doctest::Approx(0.0).epsilon(1e-13));
  CHECK(log_gamma(1e6) == doctest::Approx(12815504.569147611).epsilon(1e-13));
  CHECK(digamma(1.0) == doctest::Approx(-0.5772156649015329).epsilon(1e-13));
  CHECK(digamma(0.5) == doctest::Approx(-1.9635100260214235).epsilon(1e-13));
  CHECK(digamma(10.0) == doctest::Approx(2.251752589066721).epsilon(1e-13));
  CHECK(digamma(1e6) == doctest::Approx(13.815510057964191).epsilon(1e-13));
}

TEST_CASE("degenerate scale samples the mean") {
  Rng rng(1);
  const Policy p = DiagNormal{{0.3, -2.0}, {1e-12, 1e-12}};
  for (int i = 0; i < 100; ++i) {
    const auto a = sample(p, rng);
    CHECK(std::abs(a[0] - 0.3) < 1e-9);
    CHECK(std::abs(a[1] + 2.0) < 1e-9);
  }
  const Policy t = DiagStudentT{{0.3}, {1e-12}, 3.0};
  for (int i = 0; i < 100; ++i) CHECK(std::abs(sample(t, rng)[0] - 0.3) < 1e-9);
}

TEST_CASE("normal sample mean within 4 standard errors") {
  Rng rng(2);
  const double mu = 1.5;
  const double sigma = 0.7;
  const Policy p = DiagNormal{{mu}, {sigma}};
  const int n = 100000;
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += sample(p, rng)[0];
  CHECK(std::abs(s / n - mu) < 4.0 * sigma / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("student-t with huge dof looks normal (KS)") {
  Rng rng(3);
  const double mu = -0.4;
  const double sigma = 1.3;
  const Policy p = DiagStudentT{{mu}, {sigma}, 1e6};
  const int n = 10000;
  std::vector<double> xs(n);
  for (double& x : xs) x = sample(p, rng)[0];
  std::sort(xs.begin(), xs.end());
  double ks = 0.0;
  for (int i = 0; i < n; ++i) {
    const double f = normal_cdf((xs[i] - mu) / sigma);
    ks = std::max({ks, std::abs(f - static_cast<double>(i) / n),
                   std::abs(f - static_cast<double>(i + 1) / n)});
  }
  CHECK(ks < 0.02);
}

TEST_CASE("log density at the mode") {
  const Policy p = DiagNormal{{0.25}, {1.0}};
  const std::vector<double> a{0.25};
  CHECK(log_prob(p, a).value == doctest::Approx(-0.5 * std::log(2.0 * std::numbers::pi)).epsilon(1e-15));
  CHECK(entropy_estimate(p, a).value ==
        doctest::Approx(0.5 * std::log(2.0 * std::numbers::pi)).epsilon(1e-15));
}

TEST_CASE("student-t log density approaches the normal one") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const auto n = std::get<DiagNormal>(random_policy(rng, false));
    const DiagStudentT t{n.mean, n.scale, 1e6};
    const auto a = oracle::random_vector(n.mean.size(), rng);
    // the gap is O((z^2 + z^4) / dof) in the standardized residual z
    double bound = 1.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double z = (a[i] - n.mean[i]) / n.scale[i];
      bound += z * z + z * z * z * z;
    }
    CHECK(std::abs(log_density(Policy(t), a) - log_density(Policy(n), a)) < bound * 1e-6);

    // actions within three scales of the mean
    std::vector<double> near(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) near[i] = n.mean[i] + n.scale[i] * std::clamp(a[i], -3.0, 3.0);
    CHECK(std::abs(log_density(Policy(t), near) - log_density(Policy(n), near)) < 1e-4);
  }
}

TEST_CASE("log_prob value agrees with log_density") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const auto p = random_policy(rng, trial % 2 == 0);
    const auto a = oracle::random_vector(dim(p), rng);
    CHECK(log_prob(p, a).value == doctest::Approx(log_density(p, a)).epsilon(1e-14));
  }
}

TEST_CASE("log_prob gradients match central differences") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    const bool student = trial % 2 == 1;
    const Policy p = random_policy(rng, student);
    const auto a = oracle::random_vector(dim(p), rng, 1.5);
    const auto lp = log_prob(p, a);

    std::vector<double> x;
    std::vector<double> analytic;
    std::visit(
        [&](const auto& d) {
          x.insert(x.end(), d.mean.begin(), d.mean.end());
          x.insert(x.end(), d.scale.begin(), d.scale.end());
        },
        p);
    analytic.insert(analytic.end(), lp.d_mean.begin(), lp.d_mean.end());
    analytic.insert(analytic.end(), lp.d_scale.begin(), lp.d_scale.end());
    if (student) {
      x.push_back(std::get<DiagStudentT>(p).dof);
      analytic.push_back(lp.d_dof);
    }
    std::vector<double> numeric(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) {
      numeric[j] = oracle::five_point_difference(
          [&](const std::vector<double>& v) { return packed_log_density(p, v, a); }, x, j, 1e-3);
    }
    CHECK(oracle::max_relative_error(analytic, numeric, 1e-9) < 1e-6);
  }
}

TEST_CASE("ratio of a distribution against itself is exactly one") {
  Rng rng(7);
  std::mt19937_64 gen(7);
  for (int trial = 0; trial < 50; ++trial) {
    const auto p = random_policy(gen, trial % 2 == 0);
    const auto a = sample(p, rng);
    CHECK(std::exp(log_prob(p, a).value - log_prob(p, a).value) == 1.0);
  }
}

TEST_CASE("closed-form KL") {
  const DiagNormal a{{0.0}, {1.0}};
  const DiagNormal b{{1.0}, {1.0}};
  CHECK(kl_normal(a, a) == 0.0);
  CHECK(kl_normal(b, a) == doctest::Approx(0.5).epsilon(1e-15));

  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    const auto p = std::get<DiagNormal>(random_policy(rng, false));
    auto q = p;
    for (double& m : q.mean) m += 1e-9 * static_cast<double>(trial % 3);
    CHECK(kl_normal(p, q) >= 0.0);
    CHECK(kl_normal(p, p) == 0.0);
  }
}

TEST_CASE("KL against a Monte-Carlo estimate") {
  std::mt19937_64 gen(9);
  Rng rng(9);
  for (int trial = 0; trial < 5; ++trial) {
    const auto p = std::get<DiagNormal>(random_policy(gen, false));
    auto q = p;
    for (double& m : q.mean) m += 0.3;
    for (double& s : q.scale) s *= 1.2;
    // KL(p || q) = E_p[log p - log q]
    const int n = 100000;
    double s1 = 0.0;
    double s2 = 0.0;
    for (int i = 0; i < n; ++i) {
      const auto a = sample(Policy(p), rng);
      const double v = log_density(Policy(p), a) - log_density(Policy(q), a);
      s1 += v;
      s2 += v * v;
    }
    const double mean = s1 / n;
    const double se = std::sqrt((s2 / n - mean * mean) / n);
    CHECK(std::abs(kl_normal(p, q) - mean) < 3.0 * se);
  }
}

TEST_CASE("Pearson estimator") {
  const std::vector<double> one{std::log(1.5)};
  CHECK(pearson_from_log_ratios(one).value == doctest::Approx(0.25).epsilon(1e-14));
  const std::vector<double> huge{1000.0};
  const auto sat = pearson_from_log_ratios(huge);
  CHECK(sat.saturated);
  CHECK(std::isfinite(sat.value));

  Rng rng(10);
  const Policy n = DiagNormal{{0.2, 0.1}, {1.0, 0.5}};
  const Policy t = DiagStudentT{{0.2}, {1.0}, 4.0};
  for (std::size_t m : {1, 7, 16}) {
    CHECK(pearson_mc(n, n, m, rng).value == 0.0);
    CHECK(pearson_mc(t, t, m, rng).value == 0.0);
  }
  CHECK_THROWS_AS(pearson_mc(n, t, 4, rng), std::invalid_argument);
}

TEST_CASE("Pearson estimate matches the Gaussian closed form") {
  Rng rng(11);
  const double d = 0.1;
  const Policy p_old = DiagNormal{{0.0}, {1.0}};
  const Policy p_new = DiagNormal{{d}, {1.0}};
  const std::size_t m = 100000;
  const double chi2 = std::expm1(d * d);
  // rho = exp(d x - d^2/2), x ~ N(0,1): E[rho^k] = exp(k(k-1) d^2 / 2)
  auto moment = [&](double k) { return std::exp(k * (k - 1.0) * d * d / 2.0); };
  const double fourth = moment(4) - 4.0 * moment(3) + 6.0 * moment(2) - 4.0 * moment(1) + 1.0;
  const double se = std::sqrt((fourth - chi2 * chi2) / static_cast<double>(m));
  CHECK(std::abs(pearson_mc(p_new, p_old, m, rng).value - chi2) < 3.0 * se);
}

TEST_CASE("Pearson estimate is never negative") {
  std::mt19937_64 gen(12);
  for (int trial = 0; trial < 300; ++trial) {
    const bool student = trial % 2 == 0;
    const auto a = random_policy(gen, student);
    auto b = a;
    std::visit([&](auto& d) { for (double& m : d.mean) m += 0.5; }, b);
    Rng rng(gen());
    CHECK(pearson_mc(a, b, 1 + trial % 20, rng).value >= 0.0);
  }
}

TEST_CASE("value divergence") {
  CHECK(value_divergence(3.0, 3.0) == 0.0);
  CHECK(value_divergence(2.0, 0.0) == 2.0);
  CHECK(value_divergence(-1.0, 1.0) == 2.0);
}

TEST_CASE("entropy estimate") {
  Rng rng(13);
  const DiagNormal p{{0.5}, {0.8}};
  DiagNormal wide = p;
  wide.scale[0] *= 10.0;
  const int n = 100000;
  double s1 = 0.0;
  double s2 = 0.0;
  double shifted = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto a = sample(Policy(p), rng);
    const double h = entropy_estimate(p, a).value;
    s1 += h;
    s2 += h * h;
    // the same standardized draw under the wider distribution
    const std::vector<double> aw{p.mean[0] + 10.0 * (a[0] - p.mean[0])};
    shifted += entropy_estimate(wide, aw).value;
  }
  const double mean = s1 / n;
  const double se = std::sqrt((s2 / n - mean * mean) / n);
  CHECK(std::abs(mean - normal_entropy(p)) < 3.0 * se);
  CHECK(normal_entropy(p) == doctest::Approx(0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e * 0.64)));
  CHECK((shifted - s1) / n == doctest::Approx(std::log(10.0)).epsilon(1e-9));
}

TEST_CASE("invalid inputs") {
  const Policy p = DiagNormal{{0.0}, {1.0}};
  CHECK_THROWS_AS(log_prob(p, std::vector<double>{NAN}), std::invalid_argument);
  CHECK_THROWS_AS(log_prob(p, std::vector<double>{0.0, 1.0}), std::invalid_argument);
  CHECK_THROWS_AS(validate(Policy(DiagNormal{{0.0}, {0.0}})), std::invalid_argument);
  CHECK_THROWS_AS(validate(Policy(DiagStudentT{{0.0}, {1.0}, 2.0})), std::invalid_argument);
}

}
