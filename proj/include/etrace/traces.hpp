#pragma once

#include <cstddef>
#include <span>
#include <variant>
#include <vector>

namespace etrace::traces {

/// beta_i = 2(K - i) / (K(K - 1)), i = 1..K. Nonincreasing, sums to one,
/// last element zero. Throws std::invalid_argument for K < 2.
std::vector<double> beta_sequence(std::size_t layers);

/// Accumulated output divergence d_s and the decay factor
/// lambda_d = exp(-kappa * d_s) derived from it.
class AdaptiveDecay {
 public:
  explicit AdaptiveDecay(double kappa = 0.0);

  /// d_s <- lambda_d * d_s + (d_pi + d_v); returns the new lambda_d.
  /// Negative or non-finite divergences throw and leave the state unchanged.
  double update(double d_pi, double d_v);
  void reset();
  /// Sets (d_s, lambda_d) directly, e.g. to resume a saved state.
  void restore(double accumulated, double lambda);

  double kappa() const { return kappa_; }
  double accumulated() const { return accumulated_; }
  double lambda() const { return lambda_; }

 private:
  double kappa_;
  double accumulated_ = 0.0;
  double lambda_ = 1.0;
};

// All trace updates are elementwise and reject (throw std::invalid_argument,
// state unchanged) a non-finite or mis-sized gradient, gamma outside [0, 1]
// or lambda_d outside (0, 1].

/// e <- gamma * lambda_max * lambda_d * e + g
class StandardTrace {
 public:
  StandardTrace(std::size_t size, double lambda_max);

  std::span<const double> update(double gamma, double lambda_d, std::span<const double> g);
  void reset();
  std::span<const double> values() const { return e_; }
  double lambda_max() const { return lambda_max_; }

 private:
  std::vector<double> e_;
  double lambda_max_;
};

/// e_j <- g_j if |g_j| > |e_j| else gamma * lambda_max * lambda_d * e_j
class ReplacingTrace {
 public:
  ReplacingTrace(std::size_t size, double lambda_max);

  std::span<const double> update(double gamma, double lambda_d, std::span<const double> g);
  void reset();
  std::span<const double> values() const { return e_; }
  double lambda_max() const { return lambda_max_; }

 private:
  std::vector<double> e_;
  double lambda_max_;
};

/// K layered traces with per-layer decay. Layer 1 accumulates beta_1 * g;
/// layer i > 1 copies layer i-1 wherever (e^{i-1}_t - e^i_{t-1}) * e^{i-1}_t > 0,
/// otherwise decays and accumulates beta_i * g. The output is layer K.
class GeneralizedTrace {
 public:
  /// One lambda_max per layer; needs at least two layers.
  GeneralizedTrace(std::size_t size, std::vector<double> lambda_max);

  std::span<const double> update(double gamma, double lambda_d, std::span<const double> g);
  void reset();
  std::span<const double> values() const { return layers_.back(); }
  std::span<const double> layer(std::size_t i) const { return layers_.at(i); }
  std::size_t depth() const { return layers_.size(); }
  const std::vector<double>& beta() const { return beta_; }
  const std::vector<double>& lambda_max() const { return lambda_max_; }

 private:
  std::vector<std::vector<double>> layers_;
  std::vector<double> lambda_max_;
  std::vector<double> beta_;
};

/// No trace at all: the output is the fresh gradient.
class NoTrace {
 public:
  explicit NoTrace(std::size_t size) : e_(size, 0.0) {}

  std::span<const double> update(double gamma, double lambda_d, std::span<const double> g);
  void reset();
  std::span<const double> values() const { return e_; }

 private:
  std::vector<double> e_;
};

using AnyTrace = std::variant<NoTrace, StandardTrace, ReplacingTrace, GeneralizedTrace>;

std::span<const double> update(AnyTrace& trace, double gamma, double lambda_d,
                               std::span<const double> g);
void reset(AnyTrace& trace);
std::span<const double> values(const AnyTrace& trace);

}  // namespace etrace::traces
