#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace etrace::nn {

/// Output mapping applied to a head's affine output.
enum class Mapping {
  identity,
  softplus,           // (0, inf)
  softplus_plus_two,  // (2, inf), used for degrees of freedom
};

struct HeadSpec {
  std::string name;
  std::size_t dim = 1;
  Mapping mapping = Mapping::identity;
};

/// Fully-connected stack: every hidden layer is affine -> layer norm -> swish,
/// every head is affine -> mapping, all heads read the last hidden layer.
struct NetworkSpec {
  std::size_t input_dim = 1;
  std::size_t hidden_layers = 1;
  std::size_t hidden_width = 1;
  std::vector<HeadSpec> heads;
  bool layer_norm_affine = true;

  /// Throws std::invalid_argument on a malformed spec.
  void validate() const;
  std::size_t parameter_count() const;
};

/// Flat parameter storage; all weights and biases of one network.
using ParamVector = std::vector<double>;

/// Offsets into a ParamVector. Weights are row-major (out x in).
struct LayerLayout {
  std::size_t fan_in = 0;
  std::size_t weight = 0;
  std::size_t bias = 0;
  std::size_t gain = 0;    // only meaningful with layer_norm_affine
  std::size_t offset = 0;  // only meaningful with layer_norm_affine
};

struct HeadLayout {
  std::size_t dim = 0;
  std::size_t weight = 0;
  std::size_t bias = 0;
};

struct Layout {
  std::vector<LayerLayout> layers;
  std::vector<HeadLayout> heads;
  std::size_t size = 0;
};

struct LayerCache {
  std::vector<double> pre_norm;
  std::vector<double> normalized;  // before the learned affine
  std::vector<double> activated;
  double inv_std = 1.0;
  bool variance_floored = false;
};

/// Everything backward() needs; produced by forward().
struct ForwardCache {
  std::vector<double> input;
  std::vector<LayerCache> layers;
  std::vector<std::vector<double>> head_pre_map;
};

struct ForwardResult {
  std::vector<std::vector<double>> heads;  // in NetworkSpec::heads order
  ForwardCache cache;
};

inline constexpr double kVarianceFloor = 1e-12;

double swish(double z);
double softplus(double z);
double sigmoid(double z);

class Network {
 public:
  explicit Network(NetworkSpec spec);

  const NetworkSpec& spec() const { return spec_; }
  const Layout& layout() const { return layout_; }
  std::size_t parameter_count() const { return layout_.size; }
  std::size_t head_index(std::string_view name) const;

  /// Uniform fan-in weights, zero biases, unit gains, zero offsets.
  ParamVector init(std::uint64_t seed) const;

  ForwardResult forward(std::span<const double> params,
                        std::span<const double> input) const;

  /// Gradient of sum_h <head_grads[h], head_output[h]> w.r.t. params.
  ParamVector backward(std::span<const double> params,
                       const ForwardCache& cache,
                       std::span<const std::vector<double>> head_grads) const;

  /// Same as backward() but adds scale * gradient into `out`.
  void backward_into(std::span<const double> params, const ForwardCache& cache,
                     std::span<const std::vector<double>> head_grads,
                     double scale, std::span<double> out) const;

 private:
  NetworkSpec spec_;
  Layout layout_;
};

}  // namespace etrace::nn
