#include "etrace/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace etrace::nn {

namespace {

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

double swish_derivative(double z) {
  const double s = sigmoid(z);
  return s + z * s * (1.0 - s);
}

double apply_mapping(Mapping m, double z) {
  switch (m) {
    case Mapping::identity:
      return z;
    // floors keep the bounds strict once softplus underflows
    case Mapping::softplus:
      return std::max(softplus(z), std::numeric_limits<double>::min());
    case Mapping::softplus_plus_two:
      return std::max(2.0 + softplus(z), std::nextafter(2.0, 3.0));
  }
  return z;
}

double mapping_derivative(Mapping m, double z) {
  return m == Mapping::identity ? 1.0 : sigmoid(z);
}

// y += W x, W row-major (rows x cols)
void gemv(std::span<const double> w, std::span<const double> x, std::span<double> y) {
  const std::size_t cols = x.size();
  for (std::size_t r = 0; r < y.size(); ++r) {
    const double* row = w.data() + r * cols;
    double acc = 0.0;
    for (std::size_t c = 0; c < cols; ++c) acc += row[c] * x[c];
    y[r] += acc;
  }
}

// x_grad += W^T dy, w_grad += dy x^T
void gemv_backward(std::span<const double> w, std::span<const double> x,
                   std::span<const double> dy, std::span<double> w_grad,
                   std::span<double> x_grad) {
  const std::size_t cols = x.size();
  for (std::size_t r = 0; r < dy.size(); ++r) {
    const double g = dy[r];
    if (g == 0.0) continue;
    const double* row = w.data() + r * cols;
    double* grow = w_grad.data() + r * cols;
    for (std::size_t c = 0; c < cols; ++c) {
      grow[c] += g * x[c];
      x_grad[c] += g * row[c];
    }
  }
}

}  // namespace

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double softplus(double z) {
  if (z > 30.0) return z + std::log1p(std::exp(-z));
  return std::log1p(std::exp(z));
}

double swish(double z) { return z * sigmoid(z); }

void NetworkSpec::validate() const {
  if (input_dim < 1) throw std::invalid_argument("network: input_dim must be >= 1");
  if (hidden_layers < 1) throw std::invalid_argument("network: hidden_layers must be >= 1");
  if (hidden_width < 1) throw std::invalid_argument("network: hidden_width must be >= 1");
  if (heads.empty()) throw std::invalid_argument("network: at least one head required");
  for (const auto& h : heads) {
    if (h.dim < 1) throw std::invalid_argument("network: head '" + h.name + "' has dim 0");
  }
}

std::size_t NetworkSpec::parameter_count() const {
  std::size_t n = 0;
  std::size_t fan_in = input_dim;
  for (std::size_t l = 0; l < hidden_layers; ++l) {
    n += hidden_width * fan_in + hidden_width;
    if (layer_norm_affine) n += 2 * hidden_width;
    fan_in = hidden_width;
  }
  for (const auto& h : heads) n += h.dim * hidden_width + h.dim;
  return n;
}

Network::Network(NetworkSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  std::size_t at = 0;
  std::size_t fan_in = spec_.input_dim;
  const std::size_t width = spec_.hidden_width;
  for (std::size_t l = 0; l < spec_.hidden_layers; ++l) {
    LayerLayout ll;
    ll.fan_in = fan_in;
    ll.weight = at;
    at += width * fan_in;
    ll.bias = at;
    at += width;
    if (spec_.layer_norm_affine) {
      ll.gain = at;
      at += width;
      ll.offset = at;
      at += width;
    }
    layout_.layers.push_back(ll);
    fan_in = width;
  }
  for (const auto& h : spec_.heads) {
    HeadLayout hl;
    hl.dim = h.dim;
    hl.weight = at;
    at += h.dim * width;
    hl.bias = at;
    at += h.dim;
    layout_.heads.push_back(hl);
  }
  layout_.size = at;
}

std::size_t Network::head_index(std::string_view name) const {
  for (std::size_t i = 0; i < spec_.heads.size(); ++i) {
    if (spec_.heads[i].name == name) return i;
  }
  throw std::invalid_argument("network: no head named '" + std::string(name) + "'");
}

ParamVector Network::init(std::uint64_t seed) const {
  ParamVector p(layout_.size, 0.0);
  std::mt19937_64 rng(seed);
  const std::size_t width = spec_.hidden_width;
  for (const auto& ll : layout_.layers) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(ll.fan_in));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (std::size_t i = 0; i < width * ll.fan_in; ++i) p[ll.weight + i] = u(rng);
    if (spec_.layer_norm_affine) {
      std::fill_n(p.begin() + static_cast<std::ptrdiff_t>(ll.gain), width, 1.0);
    }
  }
  const double bound = 1.0 / std::sqrt(static_cast<double>(width));
  std::uniform_real_distribution<double> u(-bound, bound);
  for (const auto& hl : layout_.heads) {
    for (std::size_t i = 0; i < hl.dim * width; ++i) p[hl.weight + i] = u(rng);
  }
  return p;
}

ForwardResult Network::forward(std::span<const double> params,
                               std::span<const double> input) const {
  if (params.size() != layout_.size) {
    throw std::invalid_argument("network: parameter count mismatch");
  }
  if (input.size() != spec_.input_dim) {
    throw std::invalid_argument("network: input dimension mismatch");
  }
  if (!all_finite(input)) throw std::invalid_argument("network: non-finite input");

  const std::size_t width = spec_.hidden_width;
  ForwardResult out;
  ForwardCache& cache = out.cache;
  cache.input.assign(input.begin(), input.end());
  cache.layers.resize(layout_.layers.size());

  std::span<const double> x = cache.input;
  for (std::size_t l = 0; l < layout_.layers.size(); ++l) {
    const LayerLayout& ll = layout_.layers[l];
    LayerCache& lc = cache.layers[l];
    lc.pre_norm.assign(params.begin() + static_cast<std::ptrdiff_t>(ll.bias),
                       params.begin() + static_cast<std::ptrdiff_t>(ll.bias + width));
    gemv(params.subspan(ll.weight, width * ll.fan_in), x, lc.pre_norm);

    // shifted by the first unit so a constant vector has an exact mean
    const double shift = lc.pre_norm[0];
    double offset = 0.0;
    for (double z : lc.pre_norm) offset += z - shift;
    const double mean = shift + offset / static_cast<double>(width);
    double var = 0.0;
    for (double z : lc.pre_norm) var += (z - mean) * (z - mean);
    var /= static_cast<double>(width);
    lc.variance_floored = var < kVarianceFloor;
    lc.inv_std = 1.0 / std::sqrt(std::max(var, kVarianceFloor));

    lc.normalized.resize(width);
    lc.activated.resize(width);
    for (std::size_t j = 0; j < width; ++j) {
      const double xhat = (lc.pre_norm[j] - mean) * lc.inv_std;
      lc.normalized[j] = xhat;
      const double y = spec_.layer_norm_affine
                           ? params[ll.gain + j] * xhat + params[ll.offset + j]
                           : xhat;
      lc.activated[j] = swish(y);
    }
    x = lc.activated;
  }

  out.heads.resize(layout_.heads.size());
  cache.head_pre_map.resize(layout_.heads.size());
  for (std::size_t h = 0; h < layout_.heads.size(); ++h) {
    const HeadLayout& hl = layout_.heads[h];
    auto& pre = cache.head_pre_map[h];
    pre.assign(params.begin() + static_cast<std::ptrdiff_t>(hl.bias),
               params.begin() + static_cast<std::ptrdiff_t>(hl.bias + hl.dim));
    gemv(params.subspan(hl.weight, hl.dim * width), x, pre);
    out.heads[h].resize(hl.dim);
    for (std::size_t k = 0; k < hl.dim; ++k) {
      out.heads[h][k] = apply_mapping(spec_.heads[h].mapping, pre[k]);
    }
  }
  return out;
}

ParamVector Network::backward(std::span<const double> params, const ForwardCache& cache,
                              std::span<const std::vector<double>> head_grads) const {
  ParamVector grad(layout_.size, 0.0);
  backward_into(params, cache, head_grads, 1.0, grad);
  return grad;
}

void Network::backward_into(std::span<const double> params, const ForwardCache& cache,
                            std::span<const std::vector<double>> head_grads, double scale,
                            std::span<double> out) const {
  if (params.size() != layout_.size || out.size() != layout_.size) {
    throw std::invalid_argument("network: parameter count mismatch");
  }
  if (head_grads.size() != layout_.heads.size() ||
      cache.layers.size() != layout_.layers.size() ||
      cache.head_pre_map.size() != layout_.heads.size()) {
    throw std::invalid_argument("network: head/cache shape mismatch");
  }
  for (std::size_t h = 0; h < layout_.heads.size(); ++h) {
    if (head_grads[h].size() != layout_.heads[h].dim) {
      throw std::invalid_argument("network: head gradient shape mismatch");
    }
  }

  const std::size_t width = spec_.hidden_width;
  std::vector<double> dx(width, 0.0);
  std::vector<double> dpre;
  const std::span<const double> last = cache.layers.back().activated;
  for (std::size_t h = 0; h < layout_.heads.size(); ++h) {
    const HeadLayout& hl = layout_.heads[h];
    dpre.resize(hl.dim);
    for (std::size_t k = 0; k < hl.dim; ++k) {
      dpre[k] = scale * head_grads[h][k] *
                mapping_derivative(spec_.heads[h].mapping, cache.head_pre_map[h][k]);
      out[hl.bias + k] += dpre[k];
    }
    gemv_backward(params.subspan(hl.weight, hl.dim * width), last, dpre,
                  out.subspan(hl.weight, hl.dim * width), dx);
  }

  std::vector<double> dz(width);
  for (std::size_t l = layout_.layers.size(); l-- > 0;) {
    const LayerLayout& ll = layout_.layers[l];
    const LayerCache& lc = cache.layers[l];

    // through swish and the learned affine
    for (std::size_t j = 0; j < width; ++j) {
      const double xhat = lc.normalized[j];
      if (spec_.layer_norm_affine) {
        const double y = params[ll.gain + j] * xhat + params[ll.offset + j];
        const double dy = dx[j] * swish_derivative(y);
        out[ll.gain + j] += dy * xhat;
        out[ll.offset + j] += dy;
        dx[j] = dy * params[ll.gain + j];
      } else {
        dx[j] *= swish_derivative(xhat);
      }
    }

    // through the normalization statistics
    double mean_d = 0.0;
    double mean_dx = 0.0;
    for (std::size_t j = 0; j < width; ++j) {
      mean_d += dx[j];
      mean_dx += dx[j] * lc.normalized[j];
    }
    mean_d /= static_cast<double>(width);
    mean_dx /= static_cast<double>(width);
    if (lc.variance_floored) mean_dx = 0.0;
    for (std::size_t j = 0; j < width; ++j) {
      dz[j] = lc.inv_std * (dx[j] - mean_d - lc.normalized[j] * mean_dx);
      out[ll.bias + j] += dz[j];
    }

    const std::span<const double> x_prev =
        l == 0 ? std::span<const double>(cache.input)
               : std::span<const double>(cache.layers[l - 1].activated);
    std::vector<double> dx_prev(ll.fan_in, 0.0);
    gemv_backward(params.subspan(ll.weight, width * ll.fan_in), x_prev, dz,
                  out.subspan(ll.weight, width * ll.fan_in), dx_prev);
    dx = std::move(dx_prev);
  }
}

}  // namespace etrace::nn
