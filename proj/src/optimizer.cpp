#include "etrace/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace etrace {

Optimizer::Optimizer(OptimizerKind kind, std::size_t size) : kind_(kind) {
  if (kind_ == OptimizerKind::adaptive_moment) {
    m_.assign(size, 0.0);
    v_.assign(size, 0.0);
    v_max_.assign(size, 0.0);
  }
}

void Optimizer::apply(std::span<double> params, std::span<const double> update, double alpha) {
  if (params.size() != update.size()) throw std::invalid_argument("optimizer: size mismatch");
  for (double u : update) {
    if (!std::isfinite(u)) throw std::invalid_argument("optimizer: non-finite update");
  }
  ++steps_;
  if (kind_ == OptimizerKind::plain) {
    for (std::size_t j = 0; j < params.size(); ++j) params[j] -= alpha * update[j];
    return;
  }
  if (m_.size() != params.size()) throw std::invalid_argument("optimizer: size mismatch");

  const double t = static_cast<double>(steps_);
  const double c1 = 1.0 - std::pow(kBeta1, t);
  const double c2 = 1.0 - std::pow(kBeta2, t);
  for (std::size_t j = 0; j < params.size(); ++j) {
    const double u = update[j];
    m_[j] = kBeta1 * m_[j] + (1.0 - kBeta1) * u;
    v_[j] = kBeta2 * v_[j] + (1.0 - kBeta2) * u * u;
    v_max_[j] = std::max(v_max_[j], v_[j]);
    const double m_hat = m_[j] / c1;
    const double v_hat = v_max_[j] / c2;
    params[j] -= alpha * m_hat / (std::sqrt(v_hat) + kEpsilon);
  }
}

}  // namespace etrace
