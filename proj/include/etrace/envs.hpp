#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace etrace::envs {

struct EnvSpec {
  std::string name;
  std::size_t state_dim = 0;
  std::size_t action_dim = 0;
  std::vector<double> action_lower;  // physical units
  std::vector<double> action_upper;
  std::size_t max_steps = 1;
};

struct StepResult {
  std::vector<double> next_state;
  double reward = 0.0;
  bool terminal = false;   // set by the task dynamics
  bool truncated = false;  // set only by the step limit
};

/// A seedable episodic task. Actions are clipped to the spec bounds before
/// integration; non-finite actions throw std::invalid_argument.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual const EnvSpec& spec() const = 0;
  virtual std::vector<double> reset(std::uint64_t seed) = 0;
  virtual StepResult step(std::span<const double> action) = 0;
};

/// Cart-pole balancing with a continuous force, semi-implicit Euler.
class CartPole final : public Environment {
 public:
  static constexpr double kGravity = 9.8;
  static constexpr double kCartMass = 1.0;
  static constexpr double kPoleMass = 0.1;
  static constexpr double kHalfLength = 0.5;
  static constexpr double kForceScale = 10.0;
  static constexpr double kDt = 0.02;
  static constexpr double kAngleLimit = 0.2;
  static constexpr double kPositionLimit = 2.4;

  explicit CartPole(std::size_t max_steps = 200);

  const EnvSpec& spec() const override { return spec_; }
  std::vector<double> reset(std::uint64_t seed) override;
  StepResult step(std::span<const double> action) override;

  /// x, x_dot, theta, theta_dot
  void set_state(double x, double x_dot, double theta, double theta_dot);
  std::vector<double> observation() const;

 private:
  EnvSpec spec_;
  double x_ = 0, x_dot_ = 0, theta_ = 0, theta_dot_ = 0;
  std::size_t t_ = 0;
};

/// Torque-limited pendulum swing-up. The observation is (cos phi, sin phi,
/// phi_dot) with phi measured from upright.
class PendulumSwingup final : public Environment {
 public:
  static constexpr double kGravity = 9.8;
  static constexpr double kMass = 1.0;
  static constexpr double kLength = 1.0;
  static constexpr double kDamping = 0.05;
  static constexpr double kDt = 0.05;
  static constexpr double kTorqueScale = 2.0;
  static constexpr double kEffortCost = 0.001;
  // semi-implicit Euler substeps per kDt; keeps energy error under 1%
  static constexpr int kSubsteps = 20;

  explicit PendulumSwingup(std::size_t max_steps = 200, double damping = kDamping);

  const EnvSpec& spec() const override { return spec_; }
  std::vector<double> reset(std::uint64_t seed) override;
  StepResult step(std::span<const double> action) override;

  /// phi from upright, angular velocity
  void set_state(double phi, double phi_dot);
  double angle() const;
  double angular_velocity() const { return phi_dot_; }
  /// Kinetic plus potential energy, zero potential at the pivot height.
  double energy() const;
  std::vector<double> observation() const;

 private:
  EnvSpec spec_;
  double damping_;
  // angle from the hanging position; hanging is exactly 0 so the
  // downward equilibrium is exact in floating point
  double psi_ = 0;
  double phi_dot_ = 0;
  std::size_t t_ = 0;
};

/// 2-D point reaching with a correct target and a decoy that swap places
/// once the episode counter reaches switch_episode.
class PointReachSwitch final : public Environment {
 public:
  static constexpr double kStepBound = 0.05;
  static constexpr double kWorkspace = 1.0;
  static constexpr double kShaping = 5.0;
  static constexpr double kGoalRadius = 0.05;
  static constexpr double kBonus = 100.0;
  static constexpr double kPenalty = -100.0;

  /// switch_episode < 0 disables the swap.
  explicit PointReachSwitch(std::size_t max_steps = 180, long switch_episode = -1);

  const EnvSpec& spec() const override { return spec_; }
  /// Starts episode number episode_index() and then advances the counter.
  std::vector<double> reset(std::uint64_t seed) override;
  StepResult step(std::span<const double> action) override;

  void set_episode_index(long episode) { episode_ = episode; }
  long episode_index() const { return episode_; }
  void set_position(double x, double y);
  const std::vector<double>& target() const { return target_; }
  const std::vector<double>& decoy() const { return decoy_; }
  std::vector<double> observation() const;

  static constexpr double kLeftX = -0.5;
  static constexpr double kRightX = 0.5;
  static constexpr double kTargetY = 0.5;

 private:
  EnvSpec spec_;
  long switch_episode_;
  long episode_ = 0;
  std::vector<double> pos_{0.0, 0.0};
  std::vector<double> target_{kLeftX, kTargetY};
  std::vector<double> decoy_{kRightX, kTargetY};
  std::size_t t_ = 0;
};

struct EnvOptions {
  std::size_t max_steps = 0;  // 0 keeps the task default
  long switch_episode = -1;
};

/// `cartpole`, `swingup` or `reach_switch`; throws std::invalid_argument
/// for anything else.
std::unique_ptr<Environment> make_env(std::string_view name, const EnvOptions& options = {});
bool is_known_env(std::string_view name);

/// Maps a canonical action in [-1, 1] onto the spec bounds (affine).
std::vector<double> scale_action(const EnvSpec& spec, std::span<const double> canonical);

}  // namespace etrace::envs
