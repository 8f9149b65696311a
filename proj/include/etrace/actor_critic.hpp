#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "etrace/distributions.hpp"
#include "etrace/nn.hpp"

namespace etrace {

enum class PolicyFamily { normal, student_t };

struct ModelSpec {
  std::size_t state_dim = 1;
  std::size_t action_dim = 1;
  std::size_t hidden_width = 64;
  std::size_t hidden_layers = 3;
  PolicyFamily family = PolicyFamily::student_t;
  bool layer_norm_affine = true;
};

/// Separate actor and critic networks sharing one flat parameter vector:
/// actor parameters first, critic parameters after them.
///
/// Actor heads: "mean" (identity), "scale" (softplus) and, for student-t,
/// "dof" (2 + softplus, one value shared by all action dims).
/// Critic head: "value" (identity).
class ActorCritic {
 public:
  explicit ActorCritic(ModelSpec spec);

  struct Evaluation {
    dist::Policy policy;
    double value = 0.0;
    nn::ForwardCache actor_cache;
    nn::ForwardCache critic_cache;
  };

  const ModelSpec& spec() const { return spec_; }
  const nn::Network& actor() const { return actor_; }
  const nn::Network& critic() const { return critic_; }
  std::size_t parameter_count() const { return actor_.parameter_count() + critic_.parameter_count(); }
  std::size_t actor_size() const { return actor_.parameter_count(); }

  std::vector<double> init(std::uint64_t seed) const;

  Evaluation evaluate(std::span<const double> params, std::span<const double> state) const;
  dist::Policy policy(std::span<const double> params, std::span<const double> state) const;
  double value(std::span<const double> params, std::span<const double> state) const;

  /// out += scale * d(log-density)/d(theta), given the distribution-parameter
  /// gradient `lp` evaluated at `eval`.
  void add_policy_gradient(std::span<const double> params, const Evaluation& eval,
                           const dist::LogProb& lp, double scale, std::span<double> out) const;

  /// out += scale * dV/d(theta)
  void add_value_gradient(std::span<const double> params, const Evaluation& eval, double scale,
                          std::span<double> out) const;

 private:
  std::span<const double> actor_params(std::span<const double> params) const;
  std::span<const double> critic_params(std::span<const double> params) const;
  dist::Policy make_policy(const std::vector<std::vector<double>>& heads) const;

  ModelSpec spec_;
  nn::Network actor_;
  nn::Network critic_;
};

}  // namespace etrace
