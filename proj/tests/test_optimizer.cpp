#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "etrace/optimizer.hpp"

using namespace etrace;

TEST_SUITE("optimizer") {

TEST_CASE("plain step") {
  Optimizer opt(OptimizerKind::plain, 2);
  std::vector<double> theta{1.0, 1.0};
  opt.apply(theta, std::vector<double>{1.0, -2.0}, 0.1);
  CHECK(theta[0] == doctest::Approx(0.9).epsilon(1e-15));
  CHECK(theta[1] == doctest::Approx(1.2).epsilon(1e-15));
}

TEST_CASE("adaptive moment steady state under a constant update") {
  const double alpha = 1e-3;
  Optimizer opt(OptimizerKind::adaptive_moment, 3);
  const std::vector<double> u{0.5, -3.0, 1e-4};
  std::vector<double> theta(3, 0.0);
  for (int k = 0; k < 5000; ++k) {
    const auto before = theta;
    opt.apply(theta, u, alpha);
    for (std::size_t j = 0; j < 3; ++j) {
      const double step = before[j] - theta[j];
      CHECK(std::abs(step) <= alpha * (1.0 + 1e-6));
      CHECK(step * u[j] > 0.0);
      if (k == 4999) CHECK(std::abs(step) == doctest::Approx(alpha).epsilon(1e-3));
    }
  }
}

TEST_CASE("zero update on a fresh optimizer changes nothing") {
  Optimizer opt(OptimizerKind::adaptive_moment, 2);
  std::vector<double> theta{0.3, -0.2};
  opt.apply(theta, std::vector<double>{0.0, 0.0}, 0.1);
  CHECK(theta == std::vector<double>{0.3, -0.2});
  for (double m : opt.first_moment()) CHECK(m == 0.0);
  for (double v : opt.second_moment()) CHECK(v == 0.0);
}

TEST_CASE("zero update after real steps only decays the moments") {
  Optimizer opt(OptimizerKind::adaptive_moment, 1);
  std::vector<double> theta{0.0};
  opt.apply(theta, std::vector<double>{1.0}, 0.1);
  const double m = opt.first_moment()[0];
  const double v = opt.second_moment()[0];
  opt.apply(theta, std::vector<double>{0.0}, 0.1);
  CHECK(opt.first_moment()[0] == doctest::Approx(Optimizer::kBeta1 * m));
  CHECK(opt.second_moment()[0] == doctest::Approx(Optimizer::kBeta2 * v));
}

TEST_CASE("alpha zero never moves the parameters") {
  Optimizer opt(OptimizerKind::adaptive_moment, 2);
  std::vector<double> theta{0.3, -0.2};
  for (int k = 0; k < 10; ++k) opt.apply(theta, std::vector<double>{1.0, -5.0}, 0.0);
  CHECK(theta == std::vector<double>{0.3, -0.2});
}

TEST_CASE("non-finite updates are rejected before any change") {
  Optimizer opt(OptimizerKind::adaptive_moment, 2);
  std::vector<double> theta{0.3, -0.2};
  opt.apply(theta, std::vector<double>{1.0, 1.0}, 0.1);
  const auto before = theta;
  const std::vector<double> m(opt.first_moment().begin(), opt.first_moment().end());
  CHECK_THROWS_AS(opt.apply(theta, std::vector<double>{1.0, INFINITY}, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(opt.apply(theta, std::vector<double>{1.0}, 0.1), std::invalid_argument);
  CHECK(theta == before);
  CHECK(std::vector<double>(opt.first_moment().begin(), opt.first_moment().end()) == m);
  CHECK(opt.steps() == 1);
}

}
