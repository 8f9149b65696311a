#include "etrace/envs.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace etrace::envs {

namespace {

std::vector<double> clip_action(const EnvSpec& spec, std::span<const double> action) {
  if (action.size() != spec.action_dim) {
    throw std::invalid_argument(spec.name + ": action dimension mismatch");
  }
  std::vector<double> a(action.begin(), action.end());
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!std::isfinite(a[i])) throw std::invalid_argument(spec.name + ": non-finite action");
    a[i] = std::clamp(a[i], spec.action_lower[i], spec.action_upper[i]);
  }
  return a;
}

std::size_t or_default(std::size_t requested, std::size_t fallback) {
  return requested == 0 ? fallback : requested;
}

}  // namespace

// --- cart-pole ---------------------------------------------------------------

CartPole::CartPole(std::size_t max_steps) {
  spec_ = {"cartpole", 4, 1, {-1.0}, {1.0}, or_default(max_steps, 200)};
}

std::vector<double> CartPole::reset(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.05, 0.05);
  x_ = u(rng);
  x_dot_ = u(rng);
  theta_ = u(rng);
  theta_dot_ = u(rng);
  t_ = 0;
  return observation();
}

void CartPole::set_state(double x, double x_dot, double theta, double theta_dot) {
  x_ = x;
  x_dot_ = x_dot;
  theta_ = theta;
  theta_dot_ = theta_dot;
}

std::vector<double> CartPole::observation() const { return {x_, x_dot_, theta_, theta_dot_}; }

StepResult CartPole::step(std::span<const double> action) {
  const auto a = clip_action(spec_, action);
  const double force = kForceScale * a[0];
  const double total_mass = kCartMass + kPoleMass;
  const double pole_moment = kPoleMass * kHalfLength;
  const double c = std::cos(theta_);
  const double s = std::sin(theta_);

  const double temp = (force + pole_moment * theta_dot_ * theta_dot_ * s) / total_mass;
  const double theta_acc =
      (kGravity * s - c * temp) /
      (kHalfLength * (4.0 / 3.0 - kPoleMass * c * c / total_mass));
  const double x_acc = temp - pole_moment * theta_acc * c / total_mass;

  x_dot_ += kDt * x_acc;
  x_ += kDt * x_dot_;
  theta_dot_ += kDt * theta_acc;
  theta_ += kDt * theta_dot_;
  ++t_;

  StepResult r;
  r.next_state = observation();
  r.reward = 1.0;
  r.terminal = std::abs(theta_) > kAngleLimit || std::abs(x_) > kPositionLimit;
  r.truncated = !r.terminal && t_ >= spec_.max_steps;
  return r;
}

// --- pendulum swing-up -------------------------------------------------------

PendulumSwingup::PendulumSwingup(std::size_t max_steps, double damping) : damping_(damping) {
  spec_ = {"swingup", 3, 1, {-1.0}, {1.0}, or_default(max_steps, 200)};
}

std::vector<double> PendulumSwingup::reset(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.05, 0.05);
  psi_ = u(rng);
  phi_dot_ = u(rng);
  t_ = 0;
  return observation();
}

void PendulumSwingup::set_state(double phi, double phi_dot) {
  psi_ = std::remainder(phi - std::numbers::pi, 2.0 * std::numbers::pi);
  phi_dot_ = phi_dot;
}

double PendulumSwingup::angle() const {
  return std::remainder(psi_ + std::numbers::pi, 2.0 * std::numbers::pi);
}

double PendulumSwingup::energy() const {
  const double cos_phi = -std::cos(psi_);
  return 0.5 * kMass * kLength * kLength * phi_dot_ * phi_dot_ +
         kMass * kGravity * kLength * cos_phi;
}

std::vector<double> PendulumSwingup::observation() const {
  return {-std::cos(psi_), -std::sin(psi_), phi_dot_};
}

StepResult PendulumSwingup::step(std::span<const double> action) {
  const auto a = clip_action(spec_, action);
  const double torque = kTorqueScale * a[0];

  StepResult r;
  const double cos_phi = -std::cos(psi_);
  r.reward = 0.5 * (1.0 + cos_phi) - kEffortCost * torque * torque;

  const double h = kDt / static_cast<double>(kSubsteps);
  for (int i = 0; i < kSubsteps; ++i) {
    const double acc = -(kGravity / kLength) * std::sin(psi_) - damping_ * phi_dot_ +
                       torque / (kMass * kLength * kLength);
    phi_dot_ += h * acc;
    psi_ = std::remainder(psi_ + h * phi_dot_, 2.0 * std::numbers::pi);
  }
  ++t_;

  r.next_state = observation();
  r.terminal = false;
  r.truncated = t_ >= spec_.max_steps;
  return r;
}

// --- point reach with target switch ------------------------------------------

PointReachSwitch::PointReachSwitch(std::size_t max_steps, long switch_episode)
    : switch_episode_(switch_episode) {
  spec_ = {"reach_switch", 4, 2, {-kStepBound, -kStepBound}, {kStepBound, kStepBound},
           or_default(max_steps, 180)};
}

std::vector<double> PointReachSwitch::reset(std::uint64_t /*seed*/) {
  const bool switched = switch_episode_ >= 0 && episode_ >= switch_episode_;
  target_ = {switched ? kRightX : kLeftX, kTargetY};
  decoy_ = {switched ? kLeftX : kRightX, kTargetY};
  pos_ = {0.0, 0.0};
  t_ = 0;
  ++episode_;
  return observation();
}

void PointReachSwitch::set_position(double x, double y) { pos_ = {x, y}; }

std::vector<double> PointReachSwitch::observation() const {
  return {pos_[0], pos_[1], target_[0], target_[1]};
}

StepResult PointReachSwitch::step(std::span<const double> action) {
  const auto a = clip_action(spec_, action);
  for (std::size_t i = 0; i < 2; ++i) {
    pos_[i] = std::clamp(pos_[i] + a[i], -kWorkspace, kWorkspace);
  }
  ++t_;

  const double dx = pos_[0] - target_[0];
  const double dy = pos_[1] - target_[1];
  const double dist2 = dx * dx + dy * dy;
  const double ddx = pos_[0] - decoy_[0];
  const double ddy = pos_[1] - decoy_[1];

  StepResult r;
  r.reward = std::exp(-kShaping * dist2);
  if (std::sqrt(dist2) < kGoalRadius) {
    r.reward += kBonus;
    r.terminal = true;
  } else if (std::sqrt(ddx * ddx + ddy * ddy) < kGoalRadius) {
    r.reward += kPenalty;
    r.terminal = true;
  }
  r.truncated = !r.terminal && t_ >= spec_.max_steps;
  r.next_state = observation();
  return r;
}

// --- factory -----------------------------------------------------------------

bool is_known_env(std::string_view name) {
  return name == "cartpole" || name == "swingup" || name == "reach_switch";
}

std::unique_ptr<Environment> make_env(std::string_view name, const EnvOptions& options) {
  if (name == "cartpole") return std::make_unique<CartPole>(options.max_steps);
  if (name == "swingup") return std::make_unique<PendulumSwingup>(options.max_steps);
  if (name == "reach_switch") {
    return std::make_unique<PointReachSwitch>(options.max_steps, options.switch_episode);
  }
  throw std::invalid_argument("unknown environment '" + std::string(name) + "'");
}

std::vector<double> scale_action(const EnvSpec& spec, std::span<const double> canonical) {
  if (canonical.size() != spec.action_dim) {
    throw std::invalid_argument(spec.name + ": action dimension mismatch");
  }
  std::vector<double> a(canonical.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double mid = 0.5 * (spec.action_upper[i] + spec.action_lower[i]);
    const double half = 0.5 * (spec.action_upper[i] - spec.action_lower[i]);
    a[i] = mid + half * canonical[i];
  }
  return a;
}

}  // namespace etrace::envs
