#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "etrace/actor_critic.hpp"
#include "etrace/distributions.hpp"
#include "etrace/optimizer.hpp"
#include "etrace/traces.hpp"

namespace etrace {

enum class TraceKind { none, standard, replacing, generalized };

struct LearnerConfig {
  double gamma = 0.99;
  double alpha = 1e-4;
  double eps_clip = 0.1;
  double beta_de = 0.025;
  double beta_td = 0.025;
  /// One entry per trace layer. standard and replacing read the first entry.
  std::vector<double> lambda_max{0.5, 0.9};
  double kappa = 1.0;
  TraceKind trace_kind = TraceKind::generalized;
  OptimizerKind optimizer = OptimizerKind::adaptive_moment;
  std::size_t pearson_samples = 16;
  /// Keep the accumulated divergence across episode boundaries.
  bool persist_divergence = false;
  /// Fold the regularizer gradient into the trace as reg / delta when
  /// |delta| >= kFoldThreshold; otherwise it is applied directly.
  bool trace_regularizers = false;

  static constexpr double kFoldThreshold = 1e-3;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

/// One environment step as seen by the learner. The old log-density, policy
/// and value are those of the parameters that chose the action.
struct Transition {
  std::vector<double> state;
  std::vector<double> action;
  double reward = 0.0;
  std::vector<double> next_state;
  bool terminal = false;
  double logp_old = 0.0;
  dist::Policy dist_old;
  double value_old = 0.0;
};

struct StepDiagnostics {
  double td_error = 0.0;
  double lambda_d = 1.0;
  double d_pi = 0.0;
  double d_v = 0.0;
  double ratio = 1.0;
  double trace_max = 0.0;  // infinity norm of the trace output
  bool rejected = false;
  bool pearson_saturated = false;
};

struct ActionSample {
  std::vector<double> action;
  double log_prob = 0.0;
  dist::Policy policy;
  double value = 0.0;
};

/// r + gamma * V(s') * (1 - terminal) - V(s)
double td_error(double reward, double v_s, double v_next, double gamma, bool terminal);

/// clip(exp(logp_now - logp_old), 1 - eps, 1 + eps)
double clipped_ratio(double logp_now, double logp_old, double eps_clip);

struct SurrogateGradient {
  std::vector<double> g;
  double ratio = 1.0;
  double log_prob = 0.0;
};

/// g = ratio * (-grad log pi(a|s) - grad V(s)) with the clipped ratio held
/// constant. The actor/critic losses both carry the TD error as a factor,
/// so it is left out here and applied to the trace output instead.
SurrogateGradient surrogate_gradient(const ActorCritic& model, std::span<const double> params,
                                     const ActorCritic::Evaluation& at_state,
                                     const Transition& transition, double eps_clip);

/// beta_de * grad log pi(a|s) - beta_td * delta * grad V(s).
/// Never enters a trace (unless trace_regularizers folds it in).
std::vector<double> regularizer_gradient(const ActorCritic& model, std::span<const double> params,
                                         const ActorCritic::Evaluation& at_state,
                                         std::span<const double> action, double td,
                                         double beta_de, double beta_td);

/// d_pi: closed-form KL for normal policies, Monte-Carlo Pearson for
/// student-t. d_v: half squared difference. Throws on family mismatch.
dist::DivergenceReport divergence_probe(const dist::Policy& p_new, const dist::Policy& p_old,
                                        double v_new, double v_old, std::size_t pearson_samples,
                                        Rng& rng, bool* saturated = nullptr);

/// Online actor-critic with eligibility traces and adaptive trace decay.
/// One update per transition; see step().
class Learner {
 public:
  Learner(ActorCritic model, LearnerConfig config, std::vector<double> params,
          std::uint64_t seed);

  /// Resets traces, the adaptive decay state and the pending divergence.
  void episode_begin();

  /// Full update for one completed transition. A non-finite intermediate
  /// leaves every piece of learner state untouched and sets `rejected`.
  StepDiagnostics step(const Transition& transition);

  /// Samples from the current policy; log_prob is bitwise what step() will
  /// recompute if the parameters have not moved.
  ActionSample act(std::span<const double> state, Rng& rng) const;

  /// Distribution location; used for evaluation.
  std::vector<double> act_greedy(std::span<const double> state) const;

  const ActorCritic& model() const { return model_; }
  const LearnerConfig& config() const { return config_; }
  std::span<const double> params() const { return params_; }
  const traces::AnyTrace& trace() const { return trace_; }
  const traces::AdaptiveDecay& decay() const { return decay_; }
  const dist::DivergenceReport& pending_divergence() const { return pending_; }
  std::uint64_t updates() const { return updates_; }
  std::uint64_t incidents() const { return incidents_; }

 private:
  // Copy of everything step() mutates, restored when a step is rejected.
  struct Snapshot {
    std::vector<double> params;
    traces::AnyTrace trace;
    traces::AdaptiveDecay decay;
    Optimizer optimizer;
    Rng rng;
  };

  ActorCritic model_;
  LearnerConfig config_;
  std::vector<double> params_;
  traces::AnyTrace trace_;
  traces::AdaptiveDecay decay_;
  Optimizer optimizer_;
  Rng rng_;
  dist::DivergenceReport pending_;
  std::uint64_t updates_ = 0;
  std::uint64_t incidents_ = 0;
  std::vector<double> update_;
  Snapshot backup_;
};

traces::AnyTrace make_trace(TraceKind kind, std::size_t size, const std::vector<double>& lambda_max);

}  // namespace etrace
