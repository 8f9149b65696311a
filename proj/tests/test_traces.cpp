#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "etrace/traces.hpp"
#include "oracles.hpp"

using namespace etrace::traces;

namespace {

// e <- g if (g - e_prev) * g > 0 else gamma * lambda * e_prev
double relaxed_replacing(double e_prev, double g, double gamma, double lambda) {
  return (g - e_prev) * g > 0.0 ? g : gamma * lambda * e_prev;
}

}  // namespace

TEST_SUITE("traces") {

TEST_CASE("beta sequences") {
  CHECK(beta_sequence(2) == std::vector<double>{1.0, 0.0});
  const auto b3 = beta_sequence(3);
  CHECK(b3[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(b3[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(b3[2] == 0.0);
  for (std::size_t k = 2; k <= 10; ++k) {
    const auto b = beta_sequence(k);
    CHECK(b.size() == k);
    CHECK(b.back() == 0.0);
    CHECK(std::accumulate(b.begin(), b.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-15));
    for (std::size_t i = 1; i < k; ++i) CHECK(b[i] <= b[i - 1]);
  }
  CHECK_THROWS_AS(beta_sequence(1), std::invalid_argument);
}

TEST_CASE("adaptive decay arithmetic") {
  AdaptiveDecay zero(0.0);
  for (double d : {0.0, 0.3, 50.0, 1e300}) CHECK(zero.update(d, d) == 1.0);

  AdaptiveDecay a(1.0);
  a.restore(0.2, 0.5);
  const double l = a.update(0.06, 0.04);
  CHECK(a.accumulated() == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(l == doctest::Approx(std::exp(-0.2)).epsilon(1e-15));

  AdaptiveDecay fresh(1.5);
  CHECK(fresh.update(0.7, 0.0) == std::exp(-1.5 * 0.7));
}

TEST_CASE("adaptive decay recovers monotonically with no new divergence") {
  AdaptiveDecay a(1.0);
  double prev = a.update(2.0, 0.5);
  double prev_acc = a.accumulated();
  for (int i = 1; i <= 200; ++i) {
    const double l = a.update(0.0, 0.0);
    CHECK(l >= prev);
    CHECK(a.accumulated() <= prev_acc);
    // x = kappa d_s follows x <- x exp(-x), so x_n < 1/n
    CHECK(l >= std::exp(-1.0 / i));
    prev = l;
    prev_acc = a.accumulated();
  }
}

TEST_CASE("adaptive decay is decreasing in the injected divergence") {
  double last = 1.0;
  for (double d : {0.001, 0.01, 0.1, 1.0, 10.0}) {
    AdaptiveDecay a(1.0);
    const double l = a.update(d, 0.0);
    CHECK(l < last);
    CHECK(l > 0.0);
    last = l;
  }
  AdaptiveDecay extreme(1.0);
  CHECK(extreme.update(1e300, 0.0) > 0.0);
}

TEST_CASE("adaptive decay rejects bad divergences without changing state") {
  AdaptiveDecay a(1.0);
  a.update(0.1, 0.1);
  const double acc = a.accumulated();
  const double lam = a.lambda();
  CHECK_THROWS_AS(a.update(-1.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(a.update(0.0, NAN), std::invalid_argument);
  CHECK(a.accumulated() == acc);
  CHECK(a.lambda() == lam);
}

TEST_CASE("standard trace") {
  StandardTrace zero(1, 0.0);
  CHECK(zero.update(0.99, 1.0, std::vector<double>{2.5})[0] == 2.5);
  CHECK(zero.update(0.99, 1.0, std::vector<double>{-1.0})[0] == -1.0);

  StandardTrace t(1, 0.9);
  CHECK(t.update(0.99, 1.0, std::vector<double>{1.0})[0] == 1.0);
  CHECK(t.update(0.99, 1.0, std::vector<double>{1.0})[0] == doctest::Approx(1.891).epsilon(1e-15));
}

TEST_CASE("standard trace closed form") {
  std::mt19937_64 rng(1);
  const double gamma = 0.97;
  const double lambda = 0.8;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 4;
    const std::size_t steps = 150;
    StandardTrace t(n, lambda);
    std::vector<std::vector<double>> gs;
    for (std::size_t k = 0; k < steps; ++k) {
      gs.push_back(oracle::random_vector(n, rng));
      t.update(gamma, 1.0, gs.back());
    }
    for (std::size_t j = 0; j < n; ++j) {
      double expected = 0.0;
      for (std::size_t k = 0; k < steps; ++k) {
        expected += std::pow(gamma * lambda, static_cast<double>(steps - 1 - k)) * gs[k][j];
      }
      CHECK(std::abs(t.values()[j] - expected) < 1e-10);
    }
  }
}

TEST_CASE("replacing trace") {
  ReplacingTrace t(1, 0.9);
  CHECK(t.update(0.99, 1.0, std::vector<double>{2.0})[0] == 2.0);  // from zero: replace
  CHECK(t.update(0.99, 1.0, std::vector<double>{3.0})[0] == 3.0);
  ReplacingTrace d(1, 0.9);
  d.update(0.99, 1.0, std::vector<double>{2.0});
  CHECK(d.update(0.99, 1.0, std::vector<double>{1.0})[0] == doctest::Approx(1.782).epsilon(1e-15));
}

TEST_CASE("generalized trace hand example") {
  GeneralizedTrace t(1, {0.5, 0.9});
  t.update(1.0, 1.0, std::vector<double>{1.0});
  CHECK(t.layer(0)[0] == 1.0);
  CHECK(t.layer(1)[0] == 1.0);
  t.update(1.0, 1.0, std::vector<double>{0.2});
  CHECK(t.layer(0)[0] == doctest::Approx(0.7).epsilon(1e-15));
  CHECK(t.layer(1)[0] == doctest::Approx(0.9).epsilon(1e-15));
}

TEST_CASE("generalized trace: sign reversal between layers replaces") {
  // e2 = -1 after the first step, then the shallow layer turns to +0.5
  GeneralizedTrace t(1, {0.0, 0.9});
  t.update(0.5, 1.0, std::vector<double>{-1.0});
  CHECK(t.layer(1)[0] == -1.0);
  t.update(0.5, 1.0, std::vector<double>{0.5});
  CHECK(t.layer(0)[0] == 0.5);
  CHECK(t.layer(1)[0] == 0.5);
}

TEST_CASE("generalized trace ties take the decay branch") {
  GeneralizedTrace t(1, {0.0, 0.5});
  t.update(1.0, 1.0, std::vector<double>{1.0});
  t.update(1.0, 1.0, std::vector<double>{1.0});  // (1 - 1) * 1 == 0 -> decay
  CHECK(t.layer(1)[0] == 0.5);
}

TEST_CASE("generalized trace with zero first decay copies the gradient") {
  std::mt19937_64 rng(2);
  GeneralizedTrace t(5, {0.0, 0.9});
  for (int k = 0; k < 100; ++k) {
    const auto g = oracle::random_vector(5, rng);
    t.update(0.99, 1.0, g);
    for (std::size_t j = 0; j < 5; ++j) CHECK(t.layer(0)[j] == g[j]);
  }
}

TEST_CASE("generalized trace reproduces a relaxed replacing trace") {
  std::mt19937_64 rng(3);
  const double gamma = 0.99;
  const double lambda = 0.9;
  for (int seq = 0; seq < 100; ++seq) {
    GeneralizedTrace t(1, {0.0, lambda});
    double ref = 0.0;
    for (int k = 0; k < 200; ++k) {
      const double g = oracle::random_vector(1, rng)[0];
      ref = relaxed_replacing(ref, g, gamma, lambda);
      CHECK(std::abs(t.update(gamma, 1.0, std::vector<double>{g})[0] - ref) < 1e-12);
    }
  }
}

TEST_CASE("generalized trace matches the first layer under a dominance condition") {
  // e1 keeps a constant sign and always exceeds the previous e2 in magnitude
  GeneralizedTrace t(1, {0.9, 0.5});
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.9, 1.1);
  double scale = 1.0;
  for (int k = 0; k < 150; ++k) {
    const double e2_prev = t.layer(1)[0];
    scale *= 1.2;  // growing gradients keep e1 ahead of the previous e2
    t.update(0.99, 1.0, std::vector<double>{scale * u(rng)});
    const double e1 = t.layer(0)[0];
    REQUIRE(e1 > 0.0);
    REQUIRE(std::abs(e1) > std::abs(e2_prev));
    CHECK(t.layer(1)[0] == e1);
  }
}

TEST_CASE("kappa zero makes the trace independent of the divergence stream") {
  std::mt19937_64 rng(5);
  GeneralizedTrace a(3, {0.5, 0.9});
  GeneralizedTrace b(3, {0.5, 0.9});
  AdaptiveDecay none(0.0);
  for (int k = 0; k < 100; ++k) {
    const auto g = oracle::random_vector(3, rng);
    std::uniform_real_distribution<double> d(0.0, 5.0);
    const double lambda_d = none.update(d(rng), d(rng));
    const auto ea = a.update(0.99, lambda_d, g);
    const auto eb = b.update(0.99, 1.0, g);
    CHECK(std::vector<double>(ea.begin(), ea.end()) == std::vector<double>(eb.begin(), eb.end()));
  }
}

TEST_CASE("trace updates commute with permutations of the parameters") {
  std::mt19937_64 rng(6);
  const std::vector<std::size_t> perm{3, 0, 4, 1, 2};
  AnyTrace kinds[] = {StandardTrace(5, 0.8), ReplacingTrace(5, 0.8), GeneralizedTrace(5, {0.5, 0.9})};
  for (auto& trace : kinds) {
    AnyTrace permuted = trace;
    for (int k = 0; k < 50; ++k) {
      const auto g = oracle::random_vector(5, rng);
      std::vector<double> gp(5);
      for (std::size_t j = 0; j < 5; ++j) gp[j] = g[perm[j]];
      const auto e = update(trace, 0.95, 0.7, g);
      const auto ep = update(permuted, 0.95, 0.7, gp);
      for (std::size_t j = 0; j < 5; ++j) CHECK(ep[j] == e[perm[j]]);
    }
  }
}

TEST_CASE("reset") {
  const std::vector<double> g{0.3, -0.7};
  AnyTrace kinds[] = {NoTrace(2), StandardTrace(2, 0.9), ReplacingTrace(2, 0.9),
                      GeneralizedTrace(2, {0.5, 0.9})};
  for (auto& trace : kinds) {
    update(trace, 0.99, 1.0, std::vector<double>{5.0, 5.0});
    reset(trace);
    reset(trace);
    for (double v : values(trace)) CHECK(v == 0.0);
  }
  StandardTrace s(2, 0.9);
  s.update(0.99, 1.0, std::vector<double>{9.0, 9.0});
  s.reset();
  const auto e = s.update(0.99, 1.0, g);
  CHECK(e[0] == g[0]);
  CHECK(e[1] == g[1]);

  AdaptiveDecay a(1.0);
  a.update(3.0, 3.0);
  a.reset();
  CHECK(a.update(0.0, 0.0) == 1.0);
}

TEST_CASE("bad trace updates leave the trace unchanged") {
  StandardTrace t(2, 0.9);
  t.update(0.99, 1.0, std::vector<double>{1.0, 2.0});
  const std::vector<double> before(t.values().begin(), t.values().end());
  CHECK_THROWS_AS(t.update(0.99, 1.0, std::vector<double>{1.0, NAN}), std::invalid_argument);
  CHECK_THROWS_AS(t.update(0.99, 1.0, std::vector<double>{1.0}), std::invalid_argument);
  CHECK_THROWS_AS(t.update(1.5, 1.0, std::vector<double>{1.0, 1.0}), std::invalid_argument);
  CHECK_THROWS_AS(t.update(0.99, 0.0, std::vector<double>{1.0, 1.0}), std::invalid_argument);
  CHECK(std::vector<double>(t.values().begin(), t.values().end()) == before);
  CHECK_THROWS_AS(GeneralizedTrace(2, {0.5}), std::invalid_argument);
}

}
