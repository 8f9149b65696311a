#include "etrace/distributions.hpp"

#include <algorithm>
#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace etrace::dist {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

void check_action(const Policy& p, std::span<const double> a) {
  if (a.size() != dim(p)) throw std::invalid_argument("log_prob: action dim mismatch");
  for (double x : a) {
    if (!std::isfinite(x)) throw std::invalid_argument("log_prob: non-finite action");
  }
}

// log-density constant of a 1-d student-t with unit scale
double student_t_constant(double dof) {
  return log_gamma(0.5 * (dof + 1.0)) - log_gamma(0.5 * dof) -
         0.5 * std::log(dof * std::numbers::pi);
}

}  // namespace

// std::lgamma writes the global signgam, so it is not safe across run threads.
double log_gamma(double x) { return boost::math::lgamma(x); }

double digamma(double x) { return boost::math::digamma(x); }

std::size_t dim(const Policy& p) {
  return std::visit([](const auto& d) { return d.mean.size(); }, p);
}

std::span<const double> location(const Policy& p) {
  return std::visit([](const auto& d) { return std::span<const double>(d.mean); }, p);
}

void validate(const Policy& p) {
  std::visit(
      [](const auto& d) {
        if (d.mean.size() != d.scale.size() || d.mean.empty()) {
          throw std::invalid_argument("distribution: mean/scale dims disagree");
        }
        for (double s : d.scale) {
          if (!(s > 0.0) || !std::isfinite(s)) {
            throw std::invalid_argument("distribution: scale must be positive");
          }
        }
        for (double m : d.mean) {
          if (!std::isfinite(m)) throw std::invalid_argument("distribution: non-finite mean");
        }
      },
      p);
  if (const auto* t = std::get_if<DiagStudentT>(&p)) {
    if (!(t->dof > 2.0) || !std::isfinite(t->dof)) {
      throw std::invalid_argument("distribution: student-t dof must be > 2");
    }
  }
}

std::vector<double> sample(const Policy& p, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  if (const auto* n = std::get_if<DiagNormal>(&p)) {
    std::vector<double> a(n->mean.size());
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = n->mean[i] + n->scale[i] * normal(rng);
    return a;
  }
  const auto& t = std::get<DiagStudentT>(p);
  std::chi_squared_distribution<double> chi2(t.dof);
  std::vector<double> a(t.mean.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double z = normal(rng);
    const double w = chi2(rng);
    a[i] = t.mean[i] + t.scale[i] * (z / std::sqrt(w / t.dof));
  }
  return a;
}

LogProb log_prob(const Policy& p, std::span<const double> action) {
  check_action(p, action);
  LogProb out;
  const std::size_t n = action.size();
  out.d_mean.resize(n);
  out.d_scale.resize(n);

  if (const auto* d = std::get_if<DiagNormal>(&p)) {
    for (std::size_t i = 0; i < n; ++i) {
      const double s = d->scale[i];
      const double z = (action[i] - d->mean[i]) / s;
      out.value += -0.5 * z * z - std::log(s) - 0.5 * kLog2Pi;
      out.d_mean[i] = z / s;
      out.d_scale[i] = (z * z - 1.0) / s;
    }
    return out;
  }

  const auto& t = std::get<DiagStudentT>(p);
  const double nu = t.dof;
  const double c = student_t_constant(nu);
  const double dc = 0.5 * digamma(0.5 * (nu + 1.0)) - 0.5 * digamma(0.5 * nu) - 0.5 / nu;
  for (std::size_t i = 0; i < n; ++i) {
    const double s = t.scale[i];
    const double z = (action[i] - t.mean[i]) / s;
    const double z2 = z * z;
    const double log_term = std::log1p(z2 / nu);
    out.value += c - std::log(s) - 0.5 * (nu + 1.0) * log_term;
    const double w = (nu + 1.0) / (nu + z2);
    out.d_mean[i] = w * z / s;
    out.d_scale[i] = (w * z2 - 1.0) / s;
    out.d_dof += dc - 0.5 * log_term + 0.5 * (nu + 1.0) * z2 / (nu * (nu + z2));
  }
  return out;
}

double log_density(const Policy& p, std::span<const double> action) {
  check_action(p, action);
  double v = 0.0;
  if (const auto* d = std::get_if<DiagNormal>(&p)) {
    for (std::size_t i = 0; i < action.size(); ++i) {
      const double z = (action[i] - d->mean[i]) / d->scale[i];
      v += -0.5 * z * z - std::log(d->scale[i]) - 0.5 * kLog2Pi;
    }
    return v;
  }
  const auto& t = std::get<DiagStudentT>(p);
  const double c = student_t_constant(t.dof);
  for (std::size_t i = 0; i < action.size(); ++i) {
    const double z = (action[i] - t.mean[i]) / t.scale[i];
    v += c - std::log(t.scale[i]) - 0.5 * (t.dof + 1.0) * std::log1p(z * z / t.dof);
  }
  return v;
}

double kl_normal(const DiagNormal& p_new, const DiagNormal& p_old) {
  if (p_new.mean.size() != p_old.mean.size()) {
    throw std::invalid_argument("kl_normal: dim mismatch");
  }
  double kl = 0.0;
  for (std::size_t i = 0; i < p_new.mean.size(); ++i) {
    const double sn = p_new.scale[i];
    const double so = p_old.scale[i];
    if (sn == so && p_new.mean[i] == p_old.mean[i]) continue;
    const double dm = p_new.mean[i] - p_old.mean[i];
    const double r = sn / so;
    // log(so/sn) + (sn^2 + dm^2)/(2 so^2) - 1/2, arranged to stay >= 0
    kl += 0.5 * ((r * r - 1.0) - 2.0 * std::log(r)) + 0.5 * (dm * dm) / (so * so);
  }
  return std::max(kl, 0.0);
}

PearsonEstimate pearson_from_log_ratios(std::span<const double> log_ratios) {
  if (log_ratios.empty()) throw std::invalid_argument("pearson: need at least one sample");
  PearsonEstimate out;
  double acc = 0.0;
  for (double lr : log_ratios) {
    double rho = std::exp(lr);
    if (!(rho <= kRatioClamp)) {
      rho = kRatioClamp;
      out.saturated = true;
    }
    acc += (rho - 1.0) * (rho - 1.0);
  }
  out.value = acc / static_cast<double>(log_ratios.size());
  return out;
}

PearsonEstimate pearson_mc(const Policy& p_new, const Policy& p_old, std::size_t samples,
                           Rng& rng) {
  if (p_new.index() != p_old.index()) {
    throw std::invalid_argument("pearson_mc: distribution family mismatch");
  }
  if (dim(p_new) != dim(p_old)) throw std::invalid_argument("pearson_mc: dim mismatch");
  if (samples < 1) throw std::invalid_argument("pearson_mc: need at least one sample");
  std::vector<double> log_ratios(samples);
  for (auto& lr : log_ratios) {
    const auto a = sample(p_old, rng);
    lr = log_density(p_new, a) - log_density(p_old, a);
  }
  return pearson_from_log_ratios(log_ratios);
}

double value_divergence(double v_new, double v_old) {
  const double d = v_new - v_old;
  return 0.5 * d * d;
}

LogProb entropy_estimate(const Policy& p, std::span<const double> sampled_action) {
  LogProb lp = log_prob(p, sampled_action);
  lp.value = -lp.value;
  for (auto& g : lp.d_mean) g = -g;
  for (auto& g : lp.d_scale) g = -g;
  lp.d_dof = -lp.d_dof;
  return lp;
}

double normal_entropy(const DiagNormal& p) {
  double h = 0.0;
  for (double s : p.scale) h += 0.5 * (kLog2Pi + 1.0) + std::log(s);
  return h;
}

}  // namespace etrace::dist
