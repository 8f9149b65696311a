#include "etrace/traces.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace etrace::traces {

namespace {

void check_lambda_max(double v) {
  if (!(v >= 0.0 && v <= 1.0)) {
    throw std::invalid_argument("trace: lambda_max must lie in [0, 1]");
  }
}

void check_update(std::size_t size, double gamma, double lambda_d, std::span<const double> g) {
  if (g.size() != size) throw std::invalid_argument("trace: gradient size mismatch");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("trace: gamma must lie in [0, 1]");
  if (!(lambda_d > 0.0 && lambda_d <= 1.0)) {
    throw std::invalid_argument("trace: lambda_d must lie in (0, 1]");
  }
  for (double x : g) {
    if (!std::isfinite(x)) throw std::invalid_argument("trace: non-finite gradient");
  }
}

}  // namespace

std::vector<double> beta_sequence(std::size_t layers) {
  if (layers < 2) throw std::invalid_argument("beta_sequence: need at least two layers");
  const double k = static_cast<double>(layers);
  std::vector<double> beta(layers);
  for (std::size_t i = 1; i <= layers; ++i) {
    beta[i - 1] = 2.0 * static_cast<double>(layers - i) / (k * (k - 1.0));
  }
  return beta;
}

AdaptiveDecay::AdaptiveDecay(double kappa) : kappa_(kappa) {
  if (!(kappa >= 0.0) || !std::isfinite(kappa)) {
    throw std::invalid_argument("adaptive decay: kappa must be finite and >= 0");
  }
}

double AdaptiveDecay::update(double d_pi, double d_v) {
  if (!(d_pi >= 0.0) || !(d_v >= 0.0) || !std::isfinite(d_pi) || !std::isfinite(d_v)) {
    throw std::invalid_argument("adaptive decay: divergences must be finite and >= 0");
  }
  accumulated_ = lambda_ * accumulated_ + (d_pi + d_v);
  lambda_ = std::exp(-kappa_ * accumulated_);
  // exp underflows to 0 for huge d_s; keep lambda_d inside (0, 1]
  lambda_ = std::max(lambda_, std::numeric_limits<double>::min());
  return lambda_;
}

void AdaptiveDecay::restore(double accumulated, double lambda) {
  if (!(accumulated >= 0.0) || !std::isfinite(accumulated) || !(lambda > 0.0 && lambda <= 1.0)) {
    throw std::invalid_argument("adaptive decay: invalid state");
  }
  accumulated_ = accumulated;
  lambda_ = lambda;
}

void AdaptiveDecay::reset() {
  accumulated_ = 0.0;
  lambda_ = 1.0;
}

StandardTrace::StandardTrace(std::size_t size, double lambda_max)
    : e_(size, 0.0), lambda_max_(lambda_max) {
  check_lambda_max(lambda_max);
}

std::span<const double> StandardTrace::update(double gamma, double lambda_d,
                                              std::span<const double> g) {
  check_update(e_.size(), gamma, lambda_d, g);
  const double decay = gamma * lambda_max_ * lambda_d;
  for (std::size_t j = 0; j < e_.size(); ++j) e_[j] = decay * e_[j] + g[j];
  return e_;
}

void StandardTrace::reset() { std::fill(e_.begin(), e_.end(), 0.0); }

ReplacingTrace::ReplacingTrace(std::size_t size, double lambda_max)
    : e_(size, 0.0), lambda_max_(lambda_max) {
  check_lambda_max(lambda_max);
}

std::span<const double> ReplacingTrace::update(double gamma, double lambda_d,
                                               std::span<const double> g) {
  check_update(e_.size(), gamma, lambda_d, g);
  const double decay = gamma * lambda_max_ * lambda_d;
  for (std::size_t j = 0; j < e_.size(); ++j) {
    e_[j] = std::abs(g[j]) > std::abs(e_[j]) ? g[j] : decay * e_[j];
  }
  return e_;
}

void ReplacingTrace::reset() { std::fill(e_.begin(), e_.end(), 0.0); }

GeneralizedTrace::GeneralizedTrace(std::size_t size, std::vector<double> lambda_max)
    : lambda_max_(std::move(lambda_max)) {
  if (lambda_max_.size() < 2) {
    throw std::invalid_argument("generalized trace: need at least two layers");
  }
  for (double v : lambda_max_) check_lambda_max(v);
  beta_ = beta_sequence(lambda_max_.size());
  layers_.assign(lambda_max_.size(), std::vector<double>(size, 0.0));
}

std::span<const double> GeneralizedTrace::update(double gamma, double lambda_d,
                                                 std::span<const double> g) {
  check_update(layers_.front().size(), gamma, lambda_d, g);
  const std::size_t n = g.size();

  auto& first = layers_.front();
  const double decay0 = gamma * lambda_max_[0] * lambda_d;
  for (std::size_t j = 0; j < n; ++j) first[j] = decay0 * first[j] + beta_[0] * g[j];

  for (std::size_t i = 1; i < layers_.size(); ++i) {
    const auto& shallow = layers_[i - 1];  // already at time t
    auto& deep = layers_[i];               // still at time t-1
    const double decay = gamma * lambda_max_[i] * lambda_d;
    const double b = beta_[i];
    for (std::size_t j = 0; j < n; ++j) {
      if ((shallow[j] - deep[j]) * shallow[j] > 0.0) {
        deep[j] = shallow[j];
      } else {
        deep[j] = decay * deep[j] + b * g[j];
      }
    }
  }
  return layers_.back();
}

void GeneralizedTrace::reset() {
  for (auto& l : layers_) std::fill(l.begin(), l.end(), 0.0);
}

std::span<const double> NoTrace::update(double gamma, double lambda_d,
                                        std::span<const double> g) {
  check_update(e_.size(), gamma, lambda_d, g);
  std::copy(g.begin(), g.end(), e_.begin());
  return e_;
}

void NoTrace::reset() { std::fill(e_.begin(), e_.end(), 0.0); }

std::span<const double> update(AnyTrace& trace, double gamma, double lambda_d,
                               std::span<const double> g) {
  return std::visit([&](auto& t) { return t.update(gamma, lambda_d, g); }, trace);
}

void reset(AnyTrace& trace) {
  std::visit([](auto& t) { t.reset(); }, trace);
}

std::span<const double> values(const AnyTrace& trace) {
  return std::visit([](const auto& t) { return t.values(); }, trace);
}

}  // namespace etrace::traces
