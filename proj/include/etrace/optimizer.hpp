#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace etrace {

enum class OptimizerKind { plain, adaptive_moment };

/// Applies theta <- theta - alpha * step(update) to a flat parameter vector.
///
/// plain:           step(u) = u
/// adaptive_moment: bias-corrected first moment over the square root of the
///                  running maximum of the bias-corrected second moment
///                  (decays 0.9 / 0.999, denominator floor 1e-8).
class Optimizer {
 public:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEpsilon = 1e-8;

  Optimizer(OptimizerKind kind, std::size_t size);

  /// Throws std::invalid_argument (nothing modified) on size mismatch or a
  /// non-finite update.
  void apply(std::span<double> params, std::span<const double> update, double alpha);

  OptimizerKind kind() const { return kind_; }
  std::uint64_t steps() const { return steps_; }
  std::span<const double> first_moment() const { return m_; }
  std::span<const double> second_moment() const { return v_; }

 private:
  OptimizerKind kind_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::vector<double> v_max_;
  std::uint64_t steps_ = 0;
};

}  // namespace etrace
