#include "etrace/actor_critic.hpp"

#include <stdexcept>

namespace etrace {

namespace {

nn::NetworkSpec actor_spec(const ModelSpec& s) {
  nn::NetworkSpec n;
  n.input_dim = s.state_dim;
  n.hidden_layers = s.hidden_layers;
  n.hidden_width = s.hidden_width;
  n.layer_norm_affine = s.layer_norm_affine;
  n.heads = {{"mean", s.action_dim, nn::Mapping::identity},
             {"scale", s.action_dim, nn::Mapping::softplus}};
  if (s.family == PolicyFamily::student_t) {
    n.heads.push_back({"dof", 1, nn::Mapping::softplus_plus_two});
  }
  return n;
}

nn::NetworkSpec critic_spec(const ModelSpec& s) {
  nn::NetworkSpec n;
  n.input_dim = s.state_dim;
  n.hidden_layers = s.hidden_layers;
  n.hidden_width = s.hidden_width;
  n.layer_norm_affine = s.layer_norm_affine;
  n.heads = {{"value", 1, nn::Mapping::identity}};
  return n;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

ActorCritic::ActorCritic(ModelSpec spec)
    : spec_(spec), actor_(actor_spec(spec)), critic_(critic_spec(spec)) {
  if (spec.action_dim < 1) throw std::invalid_argument("model: action_dim must be >= 1");
}

std::vector<double> ActorCritic::init(std::uint64_t seed) const {
  std::vector<double> params = actor_.init(splitmix64(seed));
  const auto critic = critic_.init(splitmix64(seed ^ 0x5bd1e995ULL));
  params.insert(params.end(), critic.begin(), critic.end());
  return params;
}

std::span<const double> ActorCritic::actor_params(std::span<const double> params) const {
  if (params.size() != parameter_count()) {
    throw std::invalid_argument("model: parameter count mismatch");
  }
  return params.first(actor_.parameter_count());
}

std::span<const double> ActorCritic::critic_params(std::span<const double> params) const {
  if (params.size() != parameter_count()) {
    throw std::invalid_argument("model: parameter count mismatch");
  }
  return params.subspan(actor_.parameter_count());
}

dist::Policy ActorCritic::make_policy(const std::vector<std::vector<double>>& heads) const {
  if (spec_.family == PolicyFamily::normal) {
    return dist::DiagNormal{heads[0], heads[1]};
  }
  return dist::DiagStudentT{heads[0], heads[1], heads[2][0]};
}

ActorCritic::Evaluation ActorCritic::evaluate(std::span<const double> params,
                                              std::span<const double> state) const {
  auto a = actor_.forward(actor_params(params), state);
  auto c = critic_.forward(critic_params(params), state);
  Evaluation e{make_policy(a.heads), c.heads[0][0], std::move(a.cache), std::move(c.cache)};
  return e;
}

dist::Policy ActorCritic::policy(std::span<const double> params,
                                 std::span<const double> state) const {
  return make_policy(actor_.forward(actor_params(params), state).heads);
}

double ActorCritic::value(std::span<const double> params, std::span<const double> state) const {
  return critic_.forward(critic_params(params), state).heads[0][0];
}

void ActorCritic::add_policy_gradient(std::span<const double> params, const Evaluation& eval,
                                      const dist::LogProb& lp, double scale,
                                      std::span<double> out) const {
  std::vector<std::vector<double>> head_grads{lp.d_mean, lp.d_scale};
  if (spec_.family == PolicyFamily::student_t) head_grads.push_back({lp.d_dof});
  actor_.backward_into(actor_params(params), eval.actor_cache, head_grads, scale,
                       out.first(actor_.parameter_count()));
}

void ActorCritic::add_value_gradient(std::span<const double> params, const Evaluation& eval,
                                     double scale, std::span<double> out) const {
  const std::vector<std::vector<double>> head_grads{{1.0}};
  critic_.backward_into(critic_params(params), eval.critic_cache, head_grads, scale,
                        out.subspan(actor_.parameter_count()));
}

}  // namespace etrace
