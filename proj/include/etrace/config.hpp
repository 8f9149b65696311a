#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "etrace/actor_critic.hpp"
#include "etrace/envs.hpp"
#include "etrace/learner.hpp"
#include "etrace/optimizer.hpp"

namespace etrace::harness {

/// A config problem tied to one key.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string key, const std::string& message);
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

/// Everything one training run needs. Defaults are the common
/// hyperparameters at desk scale (N = 64, L = 3).
struct RunConfig {
  std::string env = "swingup";
  std::size_t episodes = 300;
  std::size_t max_steps = 0;  // 0: task default
  double gamma = 0.99;
  double alpha = 1e-4;
  double eps_clip = 0.1;
  double beta_de = 0.025;
  double beta_td = 0.025;
  double lambda1 = 0.5;
  double lambda2 = 0.9;
  double kappa = 1.0;
  std::optional<TraceKind> trace_kind;  // unset: derived from (lambda1, lambda2)
  PolicyFamily policy = PolicyFamily::student_t;
  std::size_t hidden_width = 64;
  std::size_t hidden_layers = 3;
  OptimizerKind optimizer = OptimizerKind::adaptive_moment;
  std::size_t pearson_samples = 16;
  std::uint64_t seed = 1;
  std::size_t eval_episodes = 50;
  long switch_episode = -1;  // reach_switch only; < 0 never switches
  bool layer_norm_affine = true;
  bool persist_divergence = false;
  bool trace_regularizers = false;
  std::size_t eval_every = 0;  // periodic evaluation during training; 0 = off

  /// Throws ConfigError naming the offending key.
  void validate() const;

  TraceKind resolved_trace_kind() const;
  LearnerConfig learner_config() const;
  ModelSpec model_spec(const envs::EnvSpec& env_spec) const;
  envs::EnvOptions env_options() const;
};

/// Trace kind implied by a (lambda1, lambda2) pair: both zero -> none,
/// only lambda1 -> standard, only lambda2 -> replacing, both -> generalized.
TraceKind trace_kind_for(double lambda1, double lambda2);

std::string_view to_string(TraceKind k);
std::string_view to_string(PolicyFamily p);
std::string_view to_string(OptimizerKind o);

/// Sets one key from its text value. Unknown keys and bad values throw
/// ConfigError. Range checks happen in RunConfig::validate().
void apply_setting(RunConfig& config, std::string_view key, std::string_view value);

/// Flat `key = value` lines; `#` starts a comment, blank lines are ignored.
/// Applied on top of `base`; the result is validated.
RunConfig parse_config_text(std::string_view text, const RunConfig& base = {});
RunConfig parse_config_file(const std::filesystem::path& path, const RunConfig& base = {});

/// Fully-resolved config in the same format; parsing it gives back an
/// identical config (doubles are written in shortest round-trip form).
std::string to_config_text(const RunConfig& config);

/// Shortest round-trip decimal form of a double.
std::string format_double(double v);

}  // namespace etrace::harness
