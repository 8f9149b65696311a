#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <variant>
#include <vector>

namespace etrace {

using Rng = std::mt19937_64;

namespace dist {

struct DiagNormal {
  std::vector<double> mean;
  std::vector<double> scale;
};

/// Diagonal student-t with one degrees-of-freedom value shared by all dims.
struct DiagStudentT {
  std::vector<double> mean;
  std::vector<double> scale;
  double dof = 3.0;
};

using Policy = std::variant<DiagNormal, DiagStudentT>;

/// Log-density and its gradient w.r.t. the distribution parameters.
/// d_dof is zero for the normal family.
struct LogProb {
  double value = 0.0;
  std::vector<double> d_mean;
  std::vector<double> d_scale;
  double d_dof = 0.0;
};

struct DivergenceReport {
  double d_pi = 0.0;
  double d_v = 0.0;
};

struct PearsonEstimate {
  double value = 0.0;
  bool saturated = false;  // some density ratio hit kRatioClamp
};

inline constexpr double kRatioClamp = 1e6;

std::size_t dim(const Policy& p);
std::span<const double> location(const Policy& p);

/// Throws std::invalid_argument unless scales are positive, dims agree and,
/// for student-t, dof > 2.
void validate(const Policy& p);

std::vector<double> sample(const Policy& p, Rng& rng);

/// Throws std::invalid_argument on a non-finite action or dim mismatch.
LogProb log_prob(const Policy& p, std::span<const double> action);

/// Value only; cheaper than log_prob.
double log_density(const Policy& p, std::span<const double> action);

/// KL(p_new || p_old), closed form, summed over dims.
double kl_normal(const DiagNormal& p_new, const DiagNormal& p_old);

/// Monte-Carlo Pearson chi-square divergence, samples drawn from p_old.
/// Both arguments must be the same family.
PearsonEstimate pearson_mc(const Policy& p_new, const Policy& p_old, std::size_t samples,
                           Rng& rng);

/// mean over samples of (rho - 1)^2, rho = exp(log_ratio) clamped at kRatioClamp.
PearsonEstimate pearson_from_log_ratios(std::span<const double> log_ratios);

double value_divergence(double v_new, double v_old);

/// Single-sample entropy estimate -log p(a) and its parameter gradient.
LogProb entropy_estimate(const Policy& p, std::span<const double> sampled_action);

/// Normal entropy in closed form, summed over dims.
double normal_entropy(const DiagNormal& p);

double log_gamma(double x);
double digamma(double x);

}  // namespace dist
}  // namespace etrace
